use clap::Parser;

fn main() {
    let cli = dada_kit::Cli::parse();
    match dada_kit::run(&cli) {
        Ok(manifest) => {
            eprintln!("wrote {} files to {}", manifest.outputs.len() + 1, cli.out.display());
            for f in &manifest.failures {
                eprintln!("warning: {f}");
            }
        }
        Err(e) => {
            eprintln!("dada-kit: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
