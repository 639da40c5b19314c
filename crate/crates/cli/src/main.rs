fn main() {
    std::process::exit(posbvp_cli::main_with_args(std::env::args_os()));
}
