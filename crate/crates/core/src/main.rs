fn main() {
    std::process::exit(equipart::cli::main_with_args(std::env::args_os()));
}
