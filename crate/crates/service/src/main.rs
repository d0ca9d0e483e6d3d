fn main() -> std::process::ExitCode {
    abm_service::cli::main()
}
