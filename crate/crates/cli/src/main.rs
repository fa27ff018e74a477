use clap::Parser;

fn main() {
    let cli = softforest_cli::Cli::parse();
    if let Err(e) = softforest_cli::run(cli) {
        eprintln!("softforest: {}", e.one_line());
        std::process::exit(e.exit_code());
    }
}
