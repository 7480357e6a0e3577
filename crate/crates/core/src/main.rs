use clap::Parser;

fn main() {
    let cli = humsim::cli::Cli::parse();
    std::process::exit(humsim::cli::run(cli));
}
