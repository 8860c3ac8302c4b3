fn main() {
    eprintln!("logsob: command-line interface not wired up yet");
    std::process::exit(2);
}
