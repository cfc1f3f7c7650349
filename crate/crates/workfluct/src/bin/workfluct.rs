fn main() -> std::process::ExitCode {
    workfluct::cli::main_with_args(std::env::args_os())
}
