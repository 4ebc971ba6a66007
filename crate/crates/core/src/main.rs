fn main() -> std::process::ExitCode {
    greedy_habit::cli::main_entry()
}
