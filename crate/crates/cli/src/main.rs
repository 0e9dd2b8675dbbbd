fn main() {
    std::process::exit(record_edge::cli::main_with_args(std::env::args_os()));
}
