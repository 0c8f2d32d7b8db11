use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{Estimator, ModelKind, PgAlgorithm, RunConfig, Task};
use crate::dp::{batch_objective, dp_train_epoch, mnist_sum_probability, solve, DpConfig, LabeledQuery};
use crate::error::{Error, Result};
use crate::logic::{parse_program, parse_query, Program};
use crate::mdp::Env;
use crate::optim::Optimizer;
use crate::pg::{collect_rollouts, ppo_update, sample_episode, Critic, Reinforce, ReinforceConfig};
use crate::scorer::{read_rng, write_rng, Checkpoint, FeatureStore, NeuralPolicy, ScorerParams};
use crate::sld::{derivation_probability, enumerate_derivations, CandidateOptions, EnumerateOptions, Outcome};
use crate::tasks::addition::{
    addition_dp_epoch, addition_pg_epoch, addition_program, classifier_config, evaluate_addition,
    generate_addition_dataset, AdditionSample, DigitClassifier,
};
use crate::tasks::kg::{generate_kinship, load_kg, rank_metrics, KgDataset, Triple};
use crate::tasks::kg_train::{
    load_priors, mean_positive_return, parse_triple_atom, probability_scorer, rank_split, training_queries, KgConfig,
};
use crate::tasks::{beam_search, Proof};

/// Appends to the run's log file and echoes to stdout.
struct RunLog {
    text: String,
    path: std::path::PathBuf,
}

impl RunLog {
    fn new(cfg: &RunConfig, name: &str) -> Result<Self> {
        fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
        Ok(RunLog {
            text: String::new(),
            path: cfg.output_dir.join(name),
        })
    }

    fn line(&mut self, s: String) -> Result<()> {
        emit(&format!("{s}\n"));
        self.text.push_str(&s);
        self.text.push('\n');
        fs::write(&self.path, &self.text).map_err(|e| Error::io(&self.path, e))
    }
}

fn write_report(cfg: &RunConfig, name: &str, report: &str) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join(name);
    fs::write(&path, report).map_err(|e| Error::io(&path, e))?;
    emit(report);
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(s.as_bytes());
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn required<'a, T>(v: &'a Option<T>, key: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Config(format!("`{key}` is required for this command")))
}

/// Labeled queries, one `goal<TAB>label` line each (label 1/0 or true/false).
pub fn parse_queries(text: &str, program: &mut Program) -> Result<Vec<LabeledQuery>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Data { line: i + 1, msg };
        let (goal, label) = line
            .rsplit_once('\t')
            .ok_or_else(|| err("expected goal<TAB>label".into()))?;
        let label = match label.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(err(format!("label `{other}` is not 0/1"))),
        };
        let goal = parse_query(goal, program).map_err(|e| err(e.to_string()))?;
        if goal.is_terminal() {
            return Err(err("query is already terminal".into()));
        }
        out.push(LabeledQuery::new(goal, label));
    }
    if out.is_empty() {
        return Err(Error::Validation("query file holds no queries".into()));
    }
    Ok(out)
}

/// The symbolic side of a run: a program with labeled training queries.
struct Symbolic {
    program: Program,
    queries: Vec<LabeledQuery>,
    kg: Option<KgDataset>,
}

fn load_kg_dataset(cfg: &RunConfig) -> Result<KgDataset> {
    match (&cfg.kg_train, &cfg.kg_valid, &cfg.kg_test, &cfg.kg_rules) {
        (Some(tr), Some(va), Some(te), Some(ru)) => load_kg(tr, va, te, ru),
        _ => generate_kinship(cfg.kinship_entities, cfg.kinship_drop, cfg.data_seed)?.dataset(),
    }
}

fn kg_config(cfg: &RunConfig) -> KgConfig {
    KgConfig {
        scorer: cfg.scorer.clone(),
        max_depth: cfg.max_depth,
        negatives: cfg.negatives,
        train_negatives: cfg.train_negatives,
        corrupt: cfg.corrupt,
        iterations: cfg.epochs,
        ppo: cfg.ppo.clone(),
        tie: cfg.tie,
        prior_weight: cfg.prior_weight,
        seed: cfg.seed,
    }
}

fn load_symbolic(cfg: &RunConfig, need_queries: bool) -> Result<Symbolic> {
    match cfg.task {
        Task::Program => {
            let path = required(&cfg.program, "program")?;
            let mut program = parse_program(&read(path)?)?;
            let queries = match &cfg.queries {
                Some(q) => parse_queries(&read(q)?, &mut program)?,
                None if need_queries => return Err(Error::Config("`queries` is required for this command".into())),
                None => Vec::new(),
            };
            Ok(Symbolic {
                program,
                queries,
                kg: None,
            })
        }
        Task::Kg => {
            let ds = load_kg_dataset(cfg)?;
            let (_, queries) = training_queries(&ds, &kg_config(cfg))?;
            Ok(Symbolic {
                program: ds.program.clone(),
                queries,
                kg: Some(ds),
            })
        }
        Task::Addition => Err(Error::Config("the addition task has no symbolic query set".into())),
    }
}

fn dp_config(cfg: &RunConfig) -> DpConfig {
    DpConfig {
        cap: cfg.state_cap,
        ..DpConfig::new(cfg.max_depth)
    }
}

fn with_banned(base: &DpConfig, q: &LabeledQuery) -> DpConfig {
    DpConfig {
        candidates: CandidateOptions {
            banned: q.banned.clone(),
            ..base.candidates.clone()
        },
        ..base.clone()
    }
}

/// Training state carried across epochs and checkpoints.
struct TrainState {
    params: ScorerParams,
    critic: Option<Critic>,
    opt: Optimizer,
    critic_opt: Optimizer,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl TrainState {
    fn fresh(params: ScorerParams, critic: Option<Critic>, cfg: &RunConfig) -> Self {
        TrainState {
            params,
            critic,
            opt: Optimizer::new(cfg.optimizer.clone()),
            critic_opt: Optimizer::new(cfg.optimizer.clone()),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2)),
            epoch: 0,
        }
    }

    fn save(&self, cfg: &RunConfig, command: &str) -> Result<()> {
        let mut ck = Checkpoint::new();
        ck.meta.insert("task".into(), json!(cfg.task.to_string()));
        ck.meta.insert("command".into(), json!(command));
        ck.meta.insert("epoch".into(), json!(self.epoch));
        self.params.write_to("scorer", &mut ck);
        self.opt.write_to("optimizer", &mut ck);
        if let Some(c) = &self.critic {
            c.encoder.write_to("critic", &mut ck);
            ck.vectors.insert("critic.readout".into(), c.readout.clone());
            self.critic_opt.write_to("critic_optimizer", &mut ck);
        }
        write_rng(&mut ck, "rng", &self.rng);
        ck.save(&cfg.output_dir.join("checkpoint.txt"))
    }

    /// Restores a state saved by [`TrainState::save`] on top of `self`.
    fn resume(&mut self, ck: &Checkpoint, program: &Program) -> Result<()> {
        self.params = ScorerParams::read_from(ck, "scorer")?;
        self.params.check_compatible(program)?;
        self.opt.read_state(ck, "optimizer")?;
        if let Some(c) = &mut self.critic {
            c.encoder = ScorerParams::read_from(ck, "critic")?;
            c.readout = ck.vector("critic.readout")?.to_vec();
            self.critic_opt.read_state(ck, "critic_optimizer")?;
        }
        self.rng = read_rng(ck, "rng")?;
        self.epoch = ck
            .meta("epoch")?
            .as_u64()
            .ok_or_else(|| Error::Checkpoint("epoch is not an integer".into()))? as usize;
        Ok(())
    }
}

fn check_task(ck: &Checkpoint, cfg: &RunConfig) -> Result<()> {
    let task = ck.meta("task")?.as_str().unwrap_or("");
    if task != cfg.task.to_string() {
        return Err(Error::Checkpoint(format!(
            "checkpoint was trained on task `{task}`, configured `{}`",
            cfg.task
        )));
    }
    Ok(())
}

fn maybe_resume(state: &mut TrainState, cfg: &RunConfig, program: &Program) -> Result<()> {
    if cfg.resume {
        let path = required(&cfg.checkpoint, "checkpoint")?;
        let ck = Checkpoint::load(path)?;
        check_task(&ck, cfg)?;
        state.resume(&ck, program)?;
    }
    Ok(())
}

/// Parameters for evaluation: from the checkpoint, all-zero for the uniform
/// model, or a fresh initialization.
fn eval_params(
    cfg: &RunConfig,
    program: &Program,
    fresh: impl FnOnce() -> Result<ScorerParams>,
) -> Result<ScorerParams> {
    match cfg.model {
        ModelKind::Neural => match &cfg.checkpoint {
            Some(path) => {
                let ck = Checkpoint::load(path)?;
                check_task(&ck, cfg)?;
                let p = ScorerParams::read_from(&ck, "scorer")?;
                p.check_compatible(program)?;
                Ok(p)
            }
            None => fresh(),
        },
        ModelKind::Uniform | ModelKind::Constant => ScorerParams::zeros(program, cfg.scorer.clone()),
    }
}

struct AdditionData {
    program: Program,
    train: Vec<AdditionSample>,
    test: Vec<AdditionSample>,
    store: FeatureStore,
}

fn load_addition(cfg: &RunConfig) -> Result<AdditionData> {
    let mut data = generate_addition_dataset(
        cfg.train_size + cfg.test_size,
        cfg.digits,
        cfg.feature_dim,
        cfg.sigma,
        cfg.data_seed,
    )?;
    let test = data.split_off(cfg.test_size);
    Ok(AdditionData {
        program: addition_program(),
        train: data.samples,
        test,
        store: data.store,
    })
}

fn addition_params(cfg: &RunConfig, program: &Program) -> Result<ScorerParams> {
    let sc = crate::scorer::ScorerConfig {
        init_std: cfg.scorer.init_std,
        ..classifier_config(cfg.scorer.dim, cfg.feature_dim)
    };
    ScorerParams::new(program, sc, cfg.seed)
}

pub fn dp_train(cfg: &RunConfig) -> Result<()> {
    let mut log = RunLog::new(cfg, "train.log")?;
    match cfg.task {
        Task::Addition => {
            let d = load_addition(cfg)?;
            let mut st = TrainState::fresh(addition_params(cfg, &d.program)?, None, cfg);
            maybe_resume(&mut st, cfg, &d.program)?;
            while st.epoch < cfg.epochs {
                let p = addition_dp_epoch(
                    &d.train,
                    &d.store,
                    &mut st.params,
                    &mut st.opt,
                    cfg.batch_size,
                    &mut st.rng,
                )?;
                st.epoch += 1;
                let m = evaluate_addition(&st.params, &d.store, &d.test)?;
                log.line(format!(
                    "epoch {} mean_p {:.6} test_sum_accuracy {:.6} test_digit_accuracy {:.6}",
                    st.epoch, p, m.sum_accuracy, m.digit_accuracy
                ))?;
                st.save(cfg, "dp-train")?;
            }
            addition_report(cfg, &st.params, &d)
        }
        Task::Program | Task::Kg => {
            let s = load_symbolic(cfg, true)?;
            let params = ScorerParams::new(&s.program, cfg.scorer.clone(), cfg.seed)?;
            let mut st = TrainState::fresh(params, None, cfg);
            maybe_resume(&mut st, cfg, &s.program)?;
            let dcfg = dp_config(cfg);
            let store = FeatureStore::new(0);
            while st.epoch < cfg.epochs {
                let e = dp_train_epoch(&s.queries, &s.program, &mut st.params, &store, &mut st.opt, &dcfg)?;
                st.epoch += 1;
                log.line(format!(
                    "epoch {} loss {:.6} mean_p_pos {:.6} mean_p_neg {:.6} grad_norm {:.6}",
                    st.epoch, e.loss, e.mean_p_pos, e.mean_p_neg, e.grad_norm
                ))?;
                st.save(cfg, "dp-train")?;
            }
            symbolic_report(cfg, &s, &st.params)
        }
    }
}

pub fn pg_train(cfg: &RunConfig) -> Result<()> {
    let mut log = RunLog::new(cfg, "train.log")?;
    match cfg.task {
        Task::Addition => {
            let d = load_addition(cfg)?;
            let mut st = TrainState::fresh(addition_params(cfg, &d.program)?, None, cfg);
            maybe_resume(&mut st, cfg, &d.program)?;
            let mut reinforce = Reinforce::new(ReinforceConfig {
                max_weight: cfg.max_weight,
                ..Default::default()
            });
            while st.epoch < cfg.epochs {
                let e = addition_pg_epoch(
                    &d.train,
                    &d.store,
                    &mut st.params,
                    &mut st.opt,
                    &mut reinforce,
                    cfg.batch_size,
                    cfg.ppo.rollouts,
                    &mut st.rng,
                )?;
                st.epoch += 1;
                let m = evaluate_addition(&st.params, &d.store, &d.test)?;
                log.line(format!(
                    "epoch {} mean_return {:.6} mean_weight {:.6} test_sum_accuracy {:.6}",
                    st.epoch, e.objective, e.mean_weight, m.sum_accuracy
                ))?;
                st.save(cfg, "pg-train")?;
            }
            addition_report(cfg, &st.params, &d)
        }
        Task::Program | Task::Kg => {
            let s = load_symbolic(cfg, true)?;
            let params = ScorerParams::new(&s.program, cfg.scorer.clone(), cfg.seed)?;
            let critic = match cfg.pg_algorithm {
                PgAlgorithm::Ppo => Some(Critic::new(&s.program, cfg.scorer.clone(), cfg.seed.wrapping_add(1))?),
                PgAlgorithm::Reinforce => None,
            };
            let mut st = TrainState::fresh(params, critic, cfg);
            maybe_resume(&mut st, cfg, &s.program)?;
            let store = FeatureStore::new(0);
            let mut reinforce = Reinforce::new(ReinforceConfig {
                max_weight: cfg.max_weight,
                ..Default::default()
            });
            while st.epoch < cfg.epochs {
                let batch = {
                    let policy = NeuralPolicy::new(&st.params, &store);
                    collect_rollouts(
                        &s.program,
                        cfg.max_depth,
                        &s.queries,
                        cfg.ppo.rollouts,
                        &policy,
                        &mut st.rng,
                    )?
                };
                let line = match st.critic.as_mut() {
                    Some(critic) => {
                        let stats = ppo_update(
                            &batch,
                            &mut st.params,
                            &store,
                            critic,
                            &mut st.opt,
                            &mut st.critic_opt,
                            &cfg.ppo,
                            &mut st.rng,
                        )?;
                        format!(
                            "success_rate {:.6} return_pos {:.6} return_neg {:.6} entropy {:.6} critic_loss {:.6} clip_fraction {:.6}",
                            stats.success_rate,
                            stats.mean_return_pos,
                            stats.mean_return_neg,
                            stats.entropy,
                            stats.critic_loss,
                            stats.clip_fraction
                        )
                    }
                    None => {
                        let snapshot = st.params.clone();
                        let policy = NeuralPolicy::new(&snapshot, &store);
                        let stats = reinforce.update(&batch, &policy, st.params.as_mut_slice(), &mut st.opt)?;
                        format!(
                            "mean_return {:.6} mean_weight {:.6} grad_norm {:.6}",
                            stats.mean_return, stats.mean_weight, stats.grad_norm
                        )
                    }
                };
                st.epoch += 1;
                let policy = NeuralPolicy::new(&st.params, &store);
                let exact = match mean_positive_return(&s.program, &s.queries, &policy, cfg.max_depth) {
                    Ok(v) => format!("{v:.6}"),
                    Err(Error::ResourceLimit { .. }) => "na".into(),
                    Err(e) => return Err(e),
                };
                log.line(format!("epoch {} {line} exact_return_pos {exact}", st.epoch))?;
                st.save(cfg, "pg-train")?;
            }
            symbolic_report(cfg, &s, &st.params)
        }
    }
}

fn addition_report(cfg: &RunConfig, params: &ScorerParams, d: &AdditionData) -> Result<()> {
    let m = evaluate_addition(params, &d.store, &d.test)?;
    let report = format!(
        "task addition\ndigits {}\nsamples {}\nsum_accuracy {:.6}\ndigit_accuracy {:.6}\n",
        cfg.digits, m.samples, m.sum_accuracy, m.digit_accuracy
    );
    write_report(cfg, "metrics.txt", &report)
}

/// Loss and per-query probabilities for a program task; ranking metrics for KG.
fn symbolic_report(cfg: &RunConfig, s: &Symbolic, params: &ScorerParams) -> Result<()> {
    if let Some(ds) = &s.kg {
        return kg_report(cfg, ds, params);
    }
    let store = FeatureStore::new(0);
    let obj = batch_objective(&s.queries, &s.program, params, &store, &dp_config(cfg))?;
    let correct = s
        .queries
        .iter()
        .zip(&obj.probs)
        .filter(|(q, p)| (**p >= 0.5) == q.label)
        .count();
    let mut report = format!(
        "task program\nqueries {}\nloss {:.6}\naccuracy {:.6}\n",
        s.queries.len(),
        obj.loss,
        correct as f64 / s.queries.len() as f64
    );
    for (i, (q, p)) in s.queries.iter().zip(&obj.probs).enumerate() {
        let _ = writeln!(
            report,
            "query.{i} {} label {} p {:.6}",
            s.program.goal_to_string(&q.goal),
            q.label as u8,
            p
        );
    }
    write_report(cfg, "metrics.txt", &report)
}

fn kg_report(cfg: &RunConfig, ds: &KgDataset, params: &ScorerParams) -> Result<()> {
    let kcfg = kg_config(cfg);
    let split = if cfg.eval_split == "valid" { &ds.valid } else { &ds.test };
    let priors: Option<HashMap<Triple, f64>> = cfg.priors.as_deref().map(load_priors).transpose()?;
    let store = FeatureStore::new(0);
    let policy = NeuralPolicy::new(params, &store);
    let results = match cfg.model {
        ModelKind::Constant => rank_split(ds, split, &kcfg, |_| Ok(1.0))?,
        _ => rank_split(
            ds,
            split,
            &kcfg,
            probability_scorer(ds, &policy, cfg.max_depth, priors.as_ref(), cfg.prior_weight),
        )?,
    };
    let m = rank_metrics(&results, &[1, 3, 10])?;
    let mut ranks = String::from("query\trank\tscore\n");
    for r in &results {
        let _ = writeln!(ranks, "{}\t{}\t{:.6}", r.query, r.rank, r.true_score);
    }
    let path = cfg.output_dir.join("ranks.tsv");
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    fs::write(&path, ranks).map_err(|e| Error::io(&path, e))?;
    write_report(
        cfg,
        "metrics.txt",
        &format!(
            "task kg\nsplit {}\nnegatives {}\n{}",
            cfg.eval_split,
            cfg.negatives,
            m.report()
        ),
    )
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    match cfg.task {
        Task::Addition => {
            let d = load_addition(cfg)?;
            let params = eval_params(cfg, &d.program, || addition_params(cfg, &d.program))?;
            addition_report(cfg, &params, &d)
        }
        Task::Program | Task::Kg => {
            let s = load_symbolic(cfg, cfg.task == Task::Program)?;
            let params = eval_params(cfg, &s.program, || {
                ScorerParams::new(&s.program, cfg.scorer.clone(), cfg.seed)
            })?;
            symbolic_report(cfg, &s, &params)
        }
    }
}

pub fn prove(cfg: &RunConfig) -> Result<()> {
    let text = required(&cfg.query, "query")?;
    let (mut program, kg) = match cfg.task {
        Task::Addition => return Err(Error::Config("prove needs a program or kg task".into())),
        _ => {
            let s = load_symbolic(cfg, false)?;
            (s.program, s.kg)
        }
    };
    let goal = parse_query(text, &mut program)?;
    let mut query = LabeledQuery::new(goal, true);
    if let (Some(ds), Some(t)) = (&kg, parse_triple_atom(text)) {
        query.banned = ds.fact_id(&t).into_iter().collect();
    }
    let params = eval_params(cfg, &program, || ScorerParams::zeros(&program, cfg.scorer.clone()))?;
    let store = FeatureStore::new(0);
    let policy = NeuralPolicy::new(&params, &store);
    let mut report = format!("query {}\n", program.goal_to_string(&query.goal));
    if query.goal.is_terminal() {
        return Err(Error::TerminalQuery);
    }

    let dcfg = with_banned(&dp_config(cfg), &query);
    let exact = match cfg.estimator {
        Estimator::MonteCarlo => None,
        Estimator::Dp => Some(solve(&query.goal, &program, &policy, &dcfg)?.success_probability()),
        Estimator::Auto => match solve(&query.goal, &program, &policy, &dcfg) {
            Ok(t) => Some(t.success_probability()),
            Err(Error::ResourceLimit { .. }) => None,
            Err(e) => return Err(e),
        },
    };
    let p = match exact {
        Some(p) => {
            let _ = writeln!(report, "estimator dp\nprobability {p:?}");
            p
        }
        None => {
            let (p, se) = monte_carlo(&program, &query, &policy, cfg)?;
            let _ = writeln!(
                report,
                "estimator mc\nsamples {}\nprobability {p:?}\nstderr {se:?}",
                cfg.mc_samples
            );
            p
        }
    };

    let found = beam_search(&query.goal, &program, &policy, cfg.max_depth, cfg.beam, &query.banned)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    match found.first() {
        Some((d, dp)) => {
            let proof = Proof::from_derivation(d, &program)?.with_probability(*dp);
            proof.check(&query.goal, &program)?;
            let _ = writeln!(report, "proofs_found {}\nproof_probability {dp:?}", found.len());
            for (name, body) in [("proof.txt", proof.to_text()), ("proof.json", proof.to_json()?)] {
                let path = cfg.output_dir.join(name);
                fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            }
            write_report(cfg, "prove.txt", &report)?;
            emit(&proof.to_text());
        }
        None => {
            if p > 0.0 {
                let _ = writeln!(
                    report,
                    "proofs_found 0\nreason beam of width {} found no proof",
                    cfg.beam
                );
            } else {
                let _ = writeln!(
                    report,
                    "proofs_found 0\nreason no successful derivation within depth {}",
                    cfg.max_depth
                );
            }
            write_report(cfg, "prove.txt", &report)?;
        }
    }
    Ok(())
}

/// Success frequency over `mc_samples` on-policy episodes, with its standard error.
pub fn monte_carlo(
    program: &Program,
    q: &LabeledQuery,
    policy: &NeuralPolicy<'_>,
    cfg: &RunConfig,
) -> Result<(f64, f64)> {
    let env = Env::with_options(
        program,
        cfg.max_depth,
        CandidateOptions {
            banned: q.banned.clone(),
            ..CandidateOptions::with_false()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
    let mut hits = 0usize;
    for _ in 0..cfg.mc_samples {
        if sample_episode(&env, q, 0, policy, None, &mut rng)?.outcome == Outcome::True {
            hits += 1;
        }
    }
    let n = cfg.mc_samples as f64;
    let p = hits as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

const DP_TOL: f64 = 1e-12;
const FD_TOL: f64 = 1e-4;

/// Cross-checks the exact machinery against independent computations on the
/// configured data and reports the worst discrepancies.
pub fn oracle_check(cfg: &RunConfig) -> Result<()> {
    let mut report = String::new();
    let mut ok = true;
    match cfg.task {
        Task::Addition => {
            let d = load_addition(cfg)?;
            if cfg.digits > 3 {
                return Err(Error::Config(
                    "oracle-check enumerates digits and needs digits <= 3".into(),
                ));
            }
            let params = eval_params(cfg, &d.program, || addition_params(cfg, &d.program))?;
            let clf = DigitClassifier::new(&params, &d.store);
            let mut worst: f64 = 0.0;
            for s in d.test.iter().take(20) {
                let da: Vec<_> = s.a.iter().map(|x| clf.distribution(*x)).collect::<Result<_>>()?;
                let db: Vec<_> = s.b.iter().map(|x| clf.distribution(*x)).collect::<Result<_>>()?;
                let exact = mnist_sum_probability(&da, &db, s.target)?;
                worst = worst.max((exact - enumerate_sum(&da, &db, s.target)).abs());
            }
            ok &= worst <= DP_TOL;
            let _ = writeln!(report, "carry_enumeration_max_abs_diff {worst:e}");
        }
        Task::Program | Task::Kg => {
            let s = load_symbolic(cfg, true)?;
            let params = eval_params(cfg, &s.program, || {
                ScorerParams::new(&s.program, cfg.scorer.clone(), cfg.seed)
            })?;
            let store = FeatureStore::new(0);
            let policy = NeuralPolicy::new(&params, &store);
            let base = dp_config(cfg);
            let mut worst: f64 = 0.0;
            let checked = s.queries.iter().take(20).collect::<Vec<_>>();
            for q in &checked {
                let qcfg = with_banned(&base, q);
                let dp = solve(&q.goal, &s.program, &policy, &qcfg)?.success_probability();
                let opts = EnumerateOptions {
                    candidates: qcfg.candidates.clone(),
                    ..EnumerateOptions::mdp()
                };
                let mut brute = 0.0;
                for dv in enumerate_derivations(&q.goal, &s.program, cfg.max_depth, &opts)? {
                    if dv.is_success() {
                        brute += derivation_probability(&dv, &policy)?;
                    }
                }
                worst = worst.max((dp - brute).abs());
            }
            ok &= worst <= DP_TOL;
            let _ = writeln!(
                report,
                "queries_checked {}\ndp_bruteforce_max_abs_diff {worst:e}",
                checked.len()
            );

            let sub: Vec<LabeledQuery> = checked.into_iter().cloned().collect();
            let rel = fd_check(&sub, &s.program, &params, &base, cfg.seed)?;
            ok &= rel <= FD_TOL;
            let _ = writeln!(report, "finite_difference_max_rel_err {rel:e}");
        }
    }
    let _ = writeln!(report, "status {}", if ok { "ok" } else { "mismatch" });
    write_report(cfg, "oracle.txt", &report)?;
    if ok {
        Ok(())
    } else {
        Err(Error::Validation("oracle mismatch".into()))
    }
}

/// Largest relative error between the analytic gradient of `J` and central
/// differences on ten random coordinates.
fn fd_check(data: &[LabeledQuery], program: &Program, params: &ScorerParams, cfg: &DpConfig, seed: u64) -> Result<f64> {
    let store = FeatureStore::new(0);
    let obj = batch_objective(data, program, params, &store, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let i = rng.gen_range(0..p.len());
        let x = p.as_slice()[i];
        p.as_mut_slice()[i] = x + h;
        let up = batch_objective(data, program, &p, &store, cfg)?.j;
        p.as_mut_slice()[i] = x - h;
        let down = batch_objective(data, program, &p, &store, cfg)?.j;
        p.as_mut_slice()[i] = x;
        let fd = (up - down) / (2.0 * h);
        let g = obj.grad_j[i];
        worst = worst.max((fd - g).abs() / (1e-6 + fd.abs().max(g.abs())));
    }
    Ok(worst)
}

/// `P(a + b = target)` by summing over every digit assignment.
pub fn enumerate_sum(a: &[[f64; 10]], b: &[[f64; 10]], target: u64) -> f64 {
    let n = a.len();
    let dists: Vec<&[f64; 10]> = a.iter().chain(b).collect();
    let total = 10usize.pow(2 * n as u32);
    let mut p = 0.0;
    for code in 0..total {
        let mut c = code;
        let mut digits = vec![0usize; 2 * n];
        for d in digits.iter_mut().rev() {
            *d = c % 10;
            c /= 10;
        }
        let num = |ds: &[usize]| ds.iter().fold(0u64, |acc, d| acc * 10 + *d as u64);
        if num(&digits[..n]) + num(&digits[n..]) == target {
            p += digits.iter().zip(&dists).map(|(d, dist)| dist[*d]).product::<f64>();
        }
    }
    p
}
