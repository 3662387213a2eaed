fn main() {
    if let Err(e) = vascnav::cli::run_from(std::env::args_os()) {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
