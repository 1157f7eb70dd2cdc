fn main() {
    std::process::exit(plaggm::cli::main_with_args(std::env::args_os()));
}
