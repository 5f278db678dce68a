fn main() {
    std::process::exit(star_nls::cli::run(std::env::args_os()));
}
