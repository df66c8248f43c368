//! Driving the command-line front end in-process with a config file.

use std::io::Write;

fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = dir.path().join("run.conf");
    let mut f = std::fs::File::create(&cfg)?;
    writeln!(f, "# defaults for the sweep")?;
    writeln!(f, "theta = 1.0471975512")?;
    writeln!(f, "r = 0.9")?;
    writeln!(f, "alpha-grid = 0:3:1")?;
    writeln!(f, "p-grid = 0:1:0.5")?;
    writeln!(f, "definite = true")?;
    drop(f);

    let out = dir.path().join("sweep.csv");
    // the command line overrides the file's r
    let code = qprotect::cli::run([
        "qprotect",
        "--config",
        cfg.to_str().unwrap(),
        "sweep",
        "--r",
        "0.5",
        "--output",
        out.to_str().unwrap(),
    ]);
    println!("exit code {code}");
    print!("{}", std::fs::read_to_string(&out)?);
    Ok(())
}
