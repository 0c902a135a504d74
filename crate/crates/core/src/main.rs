fn main() {
    std::process::exit(scale_picard::cli::run_from(std::env::args_os()));
}
