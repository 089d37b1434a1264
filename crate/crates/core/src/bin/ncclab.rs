fn main() -> std::process::ExitCode {
    ncclab::cli::main_with_args(std::env::args_os())
}
