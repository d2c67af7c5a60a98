fn main() {
    std::process::exit(forage::cli::run(std::env::args_os()));
}
