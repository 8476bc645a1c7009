fn main() {
    std::process::exit(sysdist_cli::main_with_args(std::env::args_os()));
}
