use clap::Parser;

fn main() {
    let cli = epifit_cli::Cli::parse();
    if let Err(e) = epifit_cli::run(cli) {
        // one machine-parsable line: error[CODE]: diagnostic
        eprintln!("{e}");
        std::process::exit(1);
    }
}
