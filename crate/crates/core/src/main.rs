fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let mut out = std::io::stdout().lock();
    let code = temperlab::cli::run_command(&argv, &mut out);
    std::process::exit(code);
}
