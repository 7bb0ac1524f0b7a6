use clap::Parser;
use fracwell::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let outcome = execute(&cli);
    if outcome.code == 0 {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    std::process::exit(outcome.code);
}
