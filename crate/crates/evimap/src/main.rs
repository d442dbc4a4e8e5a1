fn main() -> std::process::ExitCode {
    evimap::cli::main()
}
