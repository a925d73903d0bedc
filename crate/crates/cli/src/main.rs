use clap::Parser;

fn main() {
    let cli = convint_cli::Cli::parse();
    std::process::exit(convint_cli::run(&cli));
}
