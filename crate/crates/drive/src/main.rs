fn main() -> std::process::ExitCode {
    drive::cli::main()
}
