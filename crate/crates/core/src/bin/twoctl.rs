fn main() {
    std::process::exit(twoway::cli::main_with_args(std::env::args_os()));
}
