fn main() {
    let argv: Vec<String> = std::env::args().collect();
    if let Err(e) = unmask_cli::run(argv) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
