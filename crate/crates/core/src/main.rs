fn main() {
    std::process::exit(gapfill::cli::run(std::env::args_os()));
}
