fn main() -> std::process::ExitCode {
    planoforge::interface::cli::main()
}
