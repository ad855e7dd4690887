use clap::Parser;

fn main() {
    let cli = nullmix_cli::Cli::parse();
    if let Err(e) = nullmix_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
