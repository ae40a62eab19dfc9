use clap::Parser;

fn main() {
    let cli = madrp_cli::Cli::parse();
    if let Err(failure) = madrp_cli::run(&cli) {
        eprintln!("{}", failure.render());
        std::process::exit(failure.exit_code());
    }
}
