fn main() {
    std::process::exit(cstk_cli::main_with(std::env::args_os().collect()));
}
