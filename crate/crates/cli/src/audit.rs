use std::collections::BTreeMap;
use std::path::Path;

use clipaudit::engine::{make_plan, PairRef, Snapshot, SubauditView, Verdict};
use clipaudit::live::LiveAudit;
use clipaudit::rng::GENERATOR_ID;
use clipaudit::sampler::load_manifest;
use clipaudit::types::{BetaSource, CandidateId, Choice, ContestSpec, Profile, SubauditState};
use serde::{Deserialize, Serialize};

use crate::args::{AuditArgs, Format};
use crate::commands::{beta_choice, json_line};
use crate::{CliError, CliResult, Io};

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(ContestSpec),
    Many(Vec<ContestSpec>),
}

pub fn read_contests(path: &Path) -> CliResult<Vec<ContestSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let specs = match serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
    {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

#[derive(Serialize)]
struct ContestParams {
    contest_id: String,
    n: u64,
    beta: f64,
    beta_source: BetaSource,
}

#[derive(Serialize)]
struct Parameters {
    alpha: f64,
    seed: u64,
    generator: &'static str,
    contests: Vec<ContestParams>,
}

#[derive(Serialize)]
struct DrawRecord {
    draw: u64,
    ballot_id: String,
    interpretations: BTreeMap<String, Choice>,
    /// Subaudits of the contests this ballot carries, after the ballot.
    subaudits: Vec<SubauditView>,
    newly_accepted: Vec<PairRef>,
    contests_closed: Vec<String>,
}

#[derive(Serialize)]
struct Transcript {
    parameters: Parameters,
    draws: Vec<DrawRecord>,
    next_ballot: Option<String>,
    snapshot: Snapshot,
}

/// Where interpretations come from.
trait Interpreter {
    /// `None` pauses the audit.
    fn interpret(
        &mut self,
        ballot_id: &str,
        contests: &[String],
        specs: &[ContestSpec],
        io: &mut Io<'_>,
    ) -> CliResult<Option<BTreeMap<String, Choice>>>;
}

struct Replay(Profile);

impl Interpreter for Replay {
    fn interpret(
        &mut self,
        ballot_id: &str,
        _: &[String],
        _: &[ContestSpec],
        _: &mut Io<'_>,
    ) -> CliResult<Option<BTreeMap<String, Choice>>> {
        Ok(self.0.get(ballot_id).map(|b| b.choices.clone()))
    }
}

struct Terminal;

impl Interpreter for Terminal {
    fn interpret(
        &mut self,
        ballot_id: &str,
        contests: &[String],
        specs: &[ContestSpec],
        io: &mut Io<'_>,
    ) -> CliResult<Option<BTreeMap<String, Choice>>> {
        writeln!(io.stderr, "retrieve ballot {ballot_id}")?;
        let mut out = BTreeMap::new();
        for contest_id in contests {
            let spec = specs.iter().find(|s| &s.contest_id == contest_id).expect("planned contest");
            let options: Vec<&str> = spec
                .candidates
                .iter()
                .map(CandidateId::as_str)
                .chain([clipaudit::types::INVALID_TOKEN])
                .collect();
            loop {
                write!(io.stderr, "  {contest_id} [{}]: ", options.join("/"))?;
                io.stderr.flush()?;
                let mut line = String::new();
                if io.stdin.read_line(&mut line)? == 0 {
                    return Ok(None);
                }
                let token = line.trim();
                match Choice::parse(token) {
                    Ok(choice) if options.contains(&choice.as_str()) => {
                        out.insert(contest_id.clone(), choice);
                        break;
                    }
                    _ => writeln!(io.stderr, "  unknown choice {token:?}; enter one of {}", options.join(", "))?,
                }
            }
        }
        Ok(Some(out))
    }
}

fn decision(state: SubauditState) -> &'static str {
    match state {
        SubauditState::Open => "continue",
        SubauditState::Accepted => "stop",
    }
}

pub fn run(args: &AuditArgs, format: Format, io: &mut Io<'_>) -> CliResult {
    let specs = read_contests(&args.contest_spec)?;
    let profile = load_manifest(&args.manifest, Some(&specs))?;
    let mut interpreter: Box<dyn Interpreter> = match &args.replay {
        Some(path) => {
            let replay = load_manifest(path, Some(&specs))?;
            if let Some(b) = replay.ballots().iter().find(|b| profile.get(&b.ballot_id).is_none()) {
                return Err(CliError::Data(format!(
                    "replay ballot {} is not on the manifest",
                    b.ballot_id
                )));
            }
            Box::new(Replay(replay))
        }
        None => Box::new(Terminal),
    };
    let plan = make_plan(&specs, args.alpha, &beta_choice(&args.beta, args.jobs)?)?;
    let parameters = Parameters {
        alpha: args.alpha,
        seed: args.seed,
        generator: GENERATOR_ID,
        contests: plan
            .contests
            .iter()
            .map(|c| ContestParams {
                contest_id: c.spec.contest_id.clone(),
                n: c.spec.n,
                beta: c.params.beta,
                beta_source: c.params.beta_source,
            })
            .collect(),
    };
    let mut live = LiveAudit::new(plan, profile, args.seed)?;

    if format == Format::Human {
        writeln!(io.stdout, "alpha={} seed={} generator={GENERATOR_ID}", args.alpha, args.seed)?;
        for c in &parameters.contests {
            writeln!(
                io.stdout,
                "contest {}: n={} beta={:.4} source={}",
                c.contest_id, c.n, c.beta, c.beta_source
            )?;
        }
    } else if format == Format::Csv {
        writeln!(
            io.stdout,
            "draw,ballot_id,contest_id,choice,winner,loser,a,b,margin,threshold,beta,decision,alpha,seed"
        )?;
    }

    io.stdout.flush()?;

    let mut draws = Vec::new();
    while let Some(ballot_id) = live.announced().map(str::to_string) {
        let contests = live.contests_to_interpret(&ballot_id);
        let Some(interpretations) = interpreter.interpret(&ballot_id, &contests, &specs, io)? else {
            break;
        };
        let report = live.submit(&ballot_id, interpretations.clone())?;
        let snapshot = live.session().snapshot();
        let record = DrawRecord {
            draw: snapshot.draws,
            ballot_id,
            subaudits: snapshot
                .subaudits
                .into_iter()
                .filter(|s| contests.contains(&s.contest_id))
                .collect(),
            interpretations,
            newly_accepted: report.newly_accepted,
            contests_closed: report.contests_closed,
        };
        match format {
            Format::Human => {
                writeln!(io.stdout, "draw {}: ballot {}", record.draw, record.ballot_id)?;
                for s in &record.subaudits {
                    writeln!(
                        io.stdout,
                        "  {} {}: {} vs {} a={} b={} margin={} threshold={:.4} {}",
                        s.contest_id,
                        record.interpretations.get(&s.contest_id).map_or("", Choice::as_str),
                        s.winner,
                        s.loser,
                        s.a,
                        s.b,
                        s.margin,
                        s.threshold,
                        decision(s.state)
                    )?;
                }
                for c in &record.contests_closed {
                    let state = live.session().contest(c).map(|a| a.state);
                    writeln!(io.stdout, "  contest {c} closed: {}", serde_json::to_string(&state)?.trim_matches('"'))?;
                }
            }
            Format::Csv => {
                for s in &record.subaudits {
                    writeln!(
                        io.stdout,
                        "{},{},{},{},{},{},{},{},{},{:.4},{:.4},{},{},{}",
                        record.draw,
                        record.ballot_id,
                        s.contest_id,
                        record.interpretations.get(&s.contest_id).map_or("", Choice::as_str),
                        s.winner,
                        s.loser,
                        s.a,
                        s.b,
                        s.margin,
                        s.threshold,
                        s.beta,
                        decision(s.state),
                        args.alpha,
                        args.seed
                    )?;
                }
            }
            Format::Json => {}
        }
        io.stdout.flush()?;
        draws.push(record);
    }

    let snapshot = live.session().snapshot();
    let next_ballot = live.announced().map(str::to_string);
    match format {
        Format::Json => json_line(
            io,
            &Transcript {
                parameters,
                draws,
                next_ballot,
                snapshot,
            },
        ),
        Format::Csv => Ok(()),
        Format::Human => {
            match &snapshot.verdict {
                Verdict::InProgress => writeln!(
                    io.stdout,
                    "paused after {} draws; next ballot {}",
                    snapshot.draws,
                    next_ballot.as_deref().unwrap_or("-")
                )?,
                Verdict::AllAccepted => writeln!(
                    io.stdout,
                    "verdict: all reported outcomes accepted after {} draws",
                    snapshot.draws
                )?,
                Verdict::FullCount { outcomes } => {
                    writeln!(io.stdout, "verdict: full count after {} draws", snapshot.draws)?;
                    for (contest, o) in outcomes {
                        let tallies: Vec<String> = o.tallies.iter().map(|(c, v)| format!("{c}={v}")).collect();
                        let agrees = match o.agrees_with_reported {
                            Some(true) => "agrees with reported outcome",
                            Some(false) => "overturns reported outcome",
                            None => "tie",
                        };
                        writeln!(
                            io.stdout,
                            "  {contest}: {} invalid={} ({agrees})",
                            tallies.join(" "),
                            o.invalid
                        )?;
                    }
                }
            }
            Ok(())
        }
    }
}
