use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use orbatlas::commands::{self, Options, Outcome};
use orbatlas::document::Strictness;
use orbatlas::exec::Execution;
use orbatlas::report::key_table;

#[derive(Parser)]
#[command(name = "orbatlas", version, about = "Check finite orbifold atlases, groupoids of fractions and refinements")]
struct Cli {
    /// Report rendering.
    #[arg(long, value_enum, global = true, default_value_t = Format::Human)]
    format: Format,
    /// Reject unknown document fields (the default).
    #[arg(long, global = true, conflicts_with = "lenient")]
    strict: bool,
    /// Skip unknown document fields with a warning.
    #[arg(long, global = true)]
    lenient: bool,
    /// Run every check on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Chart, layer and atlas checks on an atlas document.
    Validate { path: PathBuf },
    /// Build the groupoid of fractions and summarize it.
    Groupoid { path: PathBuf },
    /// Extract an atlas from a groupoid document on one of its covers.
    FromGroupoid {
        path: PathBuf,
        #[arg(long, default_value = "coarse")]
        cover: String,
        /// Write the atlas here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare the Morita invariants of two atlases.
    Compare { first: PathBuf, second: PathBuf },
    /// Verify a refinement document and its Morita bundle.
    Refinement { path: PathBuf },
    /// Groupoid of fractions, extraction and comparison of invariants.
    Roundtrip { path: PathBuf },
    /// Print the table of report keys.
    Keys,
    /// Randomized law suites.
    Laws {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        strictness: if cli.lenient { Strictness::Lenient } else { Strictness::Strict },
        exec: if cli.sequential { Execution::Sequential } else { Execution::default() },
    };
    let mut report_to_stderr = false;
    let outcome: Outcome = match &cli.command {
        Command::Validate { path } => commands::validate(path, opts),
        Command::Groupoid { path } => commands::groupoid(path, opts),
        Command::FromGroupoid { path, cover, output } => {
            let mut o = commands::from_groupoid(path, cover, opts);
            if let Some(doc) = o.document.take() {
                match output {
                    Some(file) => {
                        if let Err(e) = std::fs::write(file, doc) {
                            eprintln!("cannot write {}: {e}", file.display());
                            return ExitCode::from(commands::EXIT_INPUT as u8);
                        }
                    }
                    None => {
                        print!("{doc}");
                        report_to_stderr = true;
                    }
                }
            }
            o
        }
        Command::Compare { first, second } => commands::compare(first, second, opts),
        Command::Refinement { path } => commands::refinement(path, opts),
        Command::Roundtrip { path } => commands::roundtrip(path, opts),
        Command::Keys => {
            print!("{}", key_table());
            return ExitCode::SUCCESS;
        }
        Command::Laws { seed, count } => commands::laws(*seed, *count),
    };
    let text = match cli.format {
        Format::Human => outcome.report.render_human(),
        Format::Machine => outcome.report.render_machine(),
    };
    if report_to_stderr {
        eprint!("{text}");
    } else {
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(text.as_bytes());
    }
    ExitCode::from(outcome.exit as u8)
}
