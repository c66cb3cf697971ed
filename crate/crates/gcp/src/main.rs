fn main() {
    std::process::exit(gcp::cli::main_with(std::env::args_os()));
}
