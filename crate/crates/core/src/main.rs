fn main() {
    std::process::exit(ion_gauge::cli::main_with_args(std::env::args_os()));
}
