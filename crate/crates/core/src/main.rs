fn main() {
    std::process::exit(suimkit::cli::run(std::env::args_os()));
}
