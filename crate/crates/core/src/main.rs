fn main() {
    std::process::exit(schwarz_box::cli::run(std::env::args_os()));
}
