fn main() -> std::process::ExitCode {
    paon::cli::main()
}
