//! The `scrib` command line: check, project, fsm, sim and gen.
//!
//! Exit codes: 0 success, 1 the protocol (or generated code) is at fault,
//! 2 the invocation is.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use scrib_core::codegen::{emit_browser_api, emit_node_api, CodegenError, SourceBundle};
use scrib_core::efsm::to_dot;
use scrib_core::verify::{
    bounded_traces, check_safety, compose_with, ComposeOptions, TraceSource, Verdict,
};
use scrib_core::{build_efsm, check_well_formed, codegen, parser, project, Efsm, Module, RoleName};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "scrib", version, about = "Multiparty protocol compiler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check a module; prints diagnostics.
    Check { input: PathBuf },
    /// Print the local type of one role.
    Project {
        input: PathBuf,
        #[command(flatten)]
        target: RoleArgs,
    },
    /// Print the state machine of one role.
    Fsm {
        input: PathBuf,
        #[command(flatten)]
        target: RoleArgs,
        /// Emit Graphviz DOT instead of text.
        #[arg(long)]
        dot: bool,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose every role's machine and check the product for safety.
    Sim {
        input: PathBuf,
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        server_role: String,
        /// Also compare global and product traces up to this length.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = ComposeOptions::default().max_configs)]
        max_configs: usize,
    },
    /// Generate a TypeScript API for one role.
    Gen {
        target: GenTarget,
        input: PathBuf,
        #[command(flatten)]
        role: RoleArgs,
        #[arg(long)]
        server_role: String,
        #[arg(short, long)]
        out: PathBuf,
        /// Replace an existing output directory.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Args)]
pub struct RoleArgs {
    #[arg(long)]
    pub protocol: String,
    #[arg(long)]
    pub role: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenTarget {
    Node,
    Browser,
}

/// A failure with its exit code; the message goes to stderr.
struct Failure(i32, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure(EXIT_USAGE, msg.into())
    }

    fn domain(msg: impl Into<String>) -> Self {
        Failure(EXIT_FAILURE, msg.into())
    }
}

type Outcome = Result<(), Failure>;

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure(code, msg)) => {
            if !msg.is_empty() {
                let _ = writeln!(err, "error: {msg}");
            }
            code
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match command {
        Command::Check { input } => {
            load(&input, err)?;
            Ok(())
        }
        Command::Project { input, target } => {
            let module = load(&input, err)?;
            require_role(&module, &target.protocol, &target.role)?;
            let sys = project(&module, &target.protocol, &target.role)
                .map_err(|e| Failure::domain(e.to_diagnostic().to_string()))?;
            emit(out, &sys.to_string())
        }
        Command::Fsm {
            input,
            target,
            dot,
            out: path,
        } => {
            let module = load(&input, err)?;
            let efsm = machine(&module, &target.protocol, &target.role)?;
            let text = if dot { to_dot(&efsm) } else { efsm.to_string() };
            match path {
                Some(p) => std::fs::write(&p, text)
                    .map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
                None => emit(out, &text),
            }
        }
        Command::Sim {
            input,
            protocol,
            server_role,
            depth,
            max_configs,
        } => {
            let module = load(&input, err)?;
            sim(&module, &protocol, &server_role, depth, max_configs, out)
        }
        Command::Gen {
            target,
            input,
            role,
            server_role,
            out: dir,
            force,
        } => {
            if dir.exists() && !force {
                return Err(Failure::usage(format!(
                    "{} already exists; pass --force to replace it",
                    dir.display()
                )));
            }
            let module = load(&input, err)?;
            require_role(&module, &role.protocol, &server_role)?;
            let efsm = machine(&module, &role.protocol, &role.role)?;
            let server = RoleName::new(&server_role);
            let bundle = match target {
                GenTarget::Node if efsm.role != server => {
                    return Err(Failure::usage(format!(
                        "node code is generated for the server role `{server}`, not `{}`",
                        efsm.role
                    )))
                }
                GenTarget::Node => emit_node_api(&efsm, &module, &role.protocol),
                GenTarget::Browser => emit_browser_api(&efsm, &module, &role.protocol, &server),
            }
            .map_err(codegen_failure)?;
            codegen::check_closed(&bundle).map_err(|errs| {
                let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
                Failure::domain(format!(
                    "generated code is not closed:\n{}",
                    lines.join("\n")
                ))
            })?;
            write_bundle(&bundle, &dir)?;
            emit(out, &bundle.manifest_text())
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::domain(format!("cannot write output: {e}")))
}

/// Reads, parses and checks a module, printing diagnostics to `err`.
fn load(path: &Path, err: &mut dyn Write) -> Result<Module, Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let file = path.display().to_string();
    let diags = match parser::parse_bytes(&file, &bytes) {
        Ok(module) => {
            let diags = check_well_formed(&module);
            if diags.is_empty() {
                return Ok(module);
            }
            diags
        }
        Err(diags) => diags,
    };
    for d in &diags {
        let _ = writeln!(err, "{d}");
    }
    let n = diags.len();
    Err(Failure::domain(format!(
        "{n} error{}",
        if n == 1 { "" } else { "s" }
    )))
}

fn require_role(module: &Module, protocol: &str, role: &str) -> Outcome {
    let p = module
        .protocol(protocol)
        .ok_or_else(|| Failure::usage(format!("unknown protocol `{protocol}`")))?;
    if !p.roles.iter().any(|r| r.as_str() == role) {
        return Err(Failure::usage(format!("`{protocol}` has no role `{role}`")));
    }
    Ok(())
}

fn machine(module: &Module, protocol: &str, role: &str) -> Result<Efsm, Failure> {
    require_role(module, protocol, role)?;
    let sys = project(module, protocol, role)
        .map_err(|e| Failure::domain(e.to_diagnostic().to_string()))?;
    build_efsm(&sys).map_err(|e| Failure::domain(e.to_string()))
}

fn codegen_failure(e: CodegenError) -> Failure {
    match e {
        CodegenError::ServerRoleRequested(_)
        | CodegenError::NotServerRole(_)
        | CodegenError::UnknownProtocol(_)
        | CodegenError::UnknownRole { .. } => Failure::usage(e.to_string()),
        _ => Failure::domain(e.to_string()),
    }
}

fn sim(
    module: &Module,
    protocol: &str,
    server_role: &str,
    depth: Option<usize>,
    max_configs: usize,
    out: &mut dyn Write,
) -> Outcome {
    require_role(module, protocol, server_role)?;
    codegen::check_topology(module, protocol, &RoleName::new(server_role))
        .map_err(codegen_failure)?;
    let roles = &module.protocol(protocol).expect("checked above").roles;
    let efsms = roles
        .iter()
        .map(|r| machine(module, protocol, r.as_str()))
        .collect::<Result<Vec<_>, _>>()?;
    let pg = compose_with(&efsms, ComposeOptions { max_configs })
        .map_err(|e| Failure::domain(e.to_string()))?;
    let report = check_safety(&pg);
    emit(out, &report.to_string())?;
    let mut ok = report.verdict == Verdict::Safe;
    if let Some(k) = depth {
        let global = bounded_traces(TraceSource::Global { module, protocol }, k);
        let product = bounded_traces(TraceSource::Product(&pg), k);
        let same = global == product;
        emit(
            out,
            &format!(
                "traces up to {k}: global {}, product {}, {}\n",
                global.len(),
                product.len(),
                if same { "equal" } else { "different" }
            ),
        )?;
        ok &= same;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::domain(String::new()))
    }
}

/// Writes the bundle to a sibling temporary directory and moves it into
/// place, so `dir` is either untouched or complete.
fn write_bundle(bundle: &SourceBundle, dir: &Path) -> Outcome {
    let io = |e: std::io::Error| Failure::domain(format!("{}: {e}", dir.display()));
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(io)?;
    let staged = tempfile::Builder::new()
        .prefix(".scrib-gen")
        .tempdir_in(&parent)
        .map_err(io)?;
    for (name, text) in &bundle.files {
        std::fs::write(staged.path().join(name), text).map_err(io)?;
    }
    if dir.exists() {
        let old = tempfile::Builder::new()
            .prefix(".scrib-old")
            .tempdir_in(&parent)
            .map_err(io)?;
        let backup = old.path().join("previous");
        std::fs::rename(dir, &backup).map_err(io)?;
        if let Err(e) = std::fs::rename(staged.path(), dir) {
            let _ = std::fs::rename(&backup, dir);
            return Err(io(e));
        }
    } else {
        std::fs::rename(staged.path(), dir).map_err(io)?;
    }
    Ok(())
}
