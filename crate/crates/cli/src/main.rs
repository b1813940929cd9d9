fn main() {
    std::process::exit(symreg_cli::main_with_args(std::env::args_os()));
}
