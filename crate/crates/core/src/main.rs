fn main() {
    std::process::exit(frlevy::cli::main_with_args(std::env::args_os()));
}
