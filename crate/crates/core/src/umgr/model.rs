//! The graph reasoner: act-history LSTM, relational graph convolution with
//! residual LayerNorm, mean aggregation and four output heads.
//!
//! Entities start from a per-kind embedding only, so nothing in the
//! parameters is tied to a particular user or item.

use std::path::{Path, PathBuf};

use memrex_neural::{checkpoint, Bound, ParamId, ParamStore, Scalar, SparseRows, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ActHistoryMode, UmgrConfig};
use crate::dialog::{Act, AgentAct, Policy, PolicyLabels, Role};
use crate::error::{Error, Result};
use crate::memgraph::{EntityId, EntityKind, MemoryGraph, PolicyMasks, RelationKind};

const N_KINDS: usize = 5;
const HEAD_NAMES: [&str; 4] = ["act", "item", "slot", "value"];

#[derive(Clone, Debug)]
struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Clone, Debug)]
struct Ids {
    act_emb: ParamId,
    kind_emb: ParamId,
    lstm_wx: ParamId,
    lstm_wh: ParamId,
    lstm_b: ParamId,
    rel: Vec<Vec<ParamId>>,
    ln: Vec<(ParamId, ParamId)>,
    ag_w: ParamId,
    ag_b: ParamId,
    merge_w: ParamId,
    merge_b: ParamId,
    heads: Vec<Mlp>,
}

fn rel_name(layer: usize, r: usize) -> String {
    let n = RelationKind::ALL.len();
    let base = format!("{:?}", RelationKind::ALL[r % n]);
    if r < n {
        format!("rgcn.{layer}.{base}")
    } else {
        format!("rgcn.{layer}.{base}_rev")
    }
}

impl Ids {
    fn lookup<T: Scalar>(store: &ParamStore<T>, n_layers: usize) -> Result<Self> {
        let id = |n: &str| store.id(n).map_err(Error::from);
        let mut rel = Vec::with_capacity(n_layers);
        let mut ln = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            rel.push(
                (0..RelationKind::N_MESSAGE_TYPES)
                    .map(|r| id(&rel_name(l, r)))
                    .collect::<Result<Vec<_>>>()?,
            );
            ln.push((id(&format!("ln.{l}.gamma"))?, id(&format!("ln.{l}.beta"))?));
        }
        let heads = HEAD_NAMES
            .iter()
            .map(|h| {
                Ok(Mlp {
                    w1: id(&format!("head.{h}.w1"))?,
                    b1: id(&format!("head.{h}.b1"))?,
                    w2: id(&format!("head.{h}.w2"))?,
                    b2: id(&format!("head.{h}.b2"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            act_emb: id("act_emb")?,
            kind_emb: id("kind_emb")?,
            lstm_wx: id("lstm.wx")?,
            lstm_wh: id("lstm.wh")?,
            lstm_b: id("lstm.b")?,
            rel,
            ln,
            ag_w: id("ag.w")?,
            ag_b: id("ag.b")?,
            merge_w: id("merge.w")?,
            merge_b: id("merge.b")?,
            heads,
        })
    }
}

/// Tensors for one decision point, independent of any tape.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub n: usize,
    pub kinds: Vec<usize>,
    /// Per message type: destination rows and, for each, its source rows.
    pub messages: Vec<(Vec<usize>, Vec<Vec<usize>>)>,
    /// Rows of candidate items, slots and values.
    pub agg_rows: Vec<usize>,
    /// Masked-in entities per head (item, slot, value) with their rows.
    pub heads: [Vec<(EntityId, usize)>; 3],
    pub tokens: Vec<usize>,
}

pub fn context_tokens(acts: &[Act], mode: ActHistoryMode, max_acts: usize) -> Vec<usize> {
    match mode {
        ActHistoryMode::None => Vec::new(),
        ActHistoryMode::LastUserOnly => vec![acts
            .iter()
            .rev()
            .find(|a| a.role() == Role::User)
            .map(|a| a.token())
            .unwrap_or(Act::INIT_TOKEN)],
        ActHistoryMode::Full => {
            if acts.is_empty() {
                vec![Act::INIT_TOKEN]
            } else {
                acts[acts.len().saturating_sub(max_acts)..]
                    .iter()
                    .map(|a| a.token())
                    .collect()
            }
        }
    }
}

impl GraphInput {
    pub fn new(graph: &MemoryGraph, masks: &PolicyMasks, acts: &[Act], cfg: &UmgrConfig) -> Self {
        let mg = graph.message_graph();
        let messages = mg
            .incoming
            .iter()
            .map(|per_dst| {
                let mut dst = Vec::new();
                let mut srcs = Vec::new();
                for (j, s) in per_dst.iter().enumerate() {
                    if !s.is_empty() {
                        dst.push(j);
                        srcs.push(s.clone());
                    }
                }
                (dst, srcs)
            })
            .collect();
        let rows = |set: &std::collections::BTreeSet<EntityId>| -> Vec<(EntityId, usize)> {
            set.iter().map(|e| (*e, mg.global(*e))).collect()
        };
        let heads = [rows(&masks.items), rows(&masks.slots), rows(&masks.values)];
        let agg_rows = heads.iter().flatten().map(|(_, r)| *r).collect();
        Self {
            n: mg.len(),
            kinds: mg.kinds.iter().map(|k| *k as usize).collect(),
            messages,
            agg_rows,
            heads,
            tokens: context_tokens(acts, cfg.act_history, cfg.max_acts),
        }
    }
}

/// Gold targets for one decision point, as graph entities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelTargets {
    pub act: AgentAct,
    /// Positive per head (item, slot, value).
    pub positives: [Option<EntityId>; 3],
}

impl LabelTargets {
    pub fn new(labels: &PolicyLabels, graph: &MemoryGraph, masks: &PolicyMasks) -> Result<Self> {
        let mut positives = [None; 3];
        if let Some(i) = labels.item {
            let e = graph
                .item_entity(i)
                .ok_or_else(|| Error::Label(format!("item {i} not in graph")))?;
            positives[0] = Some(e);
        }
        if let Some(s) = labels.slot {
            let e = graph
                .slot_entity(s)
                .ok_or_else(|| Error::Label(format!("slot {s} not in graph")))?;
            positives[1] = Some(e);
        }
        if let Some(v) = labels.value {
            let e = graph
                .value_entity(v)
                .ok_or_else(|| Error::Label(format!("value {v} not in graph")))?;
            positives[2] = Some(e);
        }
        for e in positives.iter().flatten() {
            if !masks.contains(*e) {
                return Err(Error::Label(format!("label {e} is masked out")));
            }
        }
        Ok(Self {
            act: labels.act,
            positives,
        })
    }
}

/// Several decision points merged into one disjoint graph.
#[derive(Clone, Debug)]
pub struct Batch {
    n: usize,
    kinds: Vec<usize>,
    messages: Vec<(Vec<usize>, Vec<Vec<usize>>)>,
    agg: Vec<Vec<usize>>,
    tokens: Vec<Vec<usize>>,
    /// Per head: rows, owning example and entity.
    heads: [Vec<(usize, usize, EntityId)>; 3],
    act_targets: Vec<usize>,
    head_targets: [Vec<f64>; 3],
}

impl Batch {
    /// With `labels`, head rows are restricted to those that enter the loss.
    pub fn new(inputs: &[&GraphInput], labels: Option<&[LabelTargets]>, negatives_on_free_turns: bool) -> Self {
        let n_msg = RelationKind::N_MESSAGE_TYPES;
        let mut b = Batch {
            n: 0,
            kinds: Vec::new(),
            messages: vec![(Vec::new(), Vec::new()); n_msg],
            agg: Vec::with_capacity(inputs.len()),
            tokens: Vec::with_capacity(inputs.len()),
            heads: Default::default(),
            act_targets: Vec::new(),
            head_targets: Default::default(),
        };
        for (ex, g) in inputs.iter().enumerate() {
            let off = b.n;
            b.kinds.extend(&g.kinds);
            for (r, (dst, srcs)) in g.messages.iter().enumerate() {
                b.messages[r].0.extend(dst.iter().map(|d| d + off));
                b.messages[r]
                    .1
                    .extend(srcs.iter().map(|s| s.iter().map(|x| x + off).collect::<Vec<_>>()));
            }
            b.agg.push(g.agg_rows.iter().map(|r| r + off).collect());
            b.tokens.push(g.tokens.clone());
            let label = labels.map(|l| l[ex]);
            if let Some(l) = label {
                b.act_targets.push(l.act.index());
            }
            for h in 0..3 {
                let include = match label {
                    Some(l) => negatives_on_free_turns || l.positives[h].is_some(),
                    None => true,
                };
                if !include {
                    continue;
                }
                for (e, row) in &g.heads[h] {
                    b.heads[h].push((row + off, ex, *e));
                    if let Some(l) = label {
                        b.head_targets[h].push(if l.positives[h] == Some(*e) { 1.0 } else { 0.0 });
                    }
                }
            }
            b.n += g.n;
        }
        b
    }

    pub fn len(&self) -> usize {
        self.agg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agg.is_empty()
    }
}

pub struct ForwardVars {
    pub states: Var,
    pub context: Var,
    pub aggregate: Var,
    pub act_logits: Var,
    /// Logits per head (item, slot, value); `None` for an empty head.
    pub heads: [Option<Var>; 3],
}

/// Loss terms on the tape, in act/item/slot/value order, and their
/// weighted sum.
pub struct LossVars {
    pub total: Var,
    pub terms: [Var; 4],
}

#[derive(Clone, Debug)]
pub struct UmgrModel<T: Scalar> {
    pub config: UmgrConfig,
    pub params: ParamStore<T>,
    ids: Ids,
}

impl<T: Scalar> UmgrModel<T> {
    pub fn new(config: UmgrConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = ParamStore::new();
        p.add("act_emb", Tensor::uniform(Act::N_TOKENS, h, 0.1, &mut rng))?;
        p.add("kind_emb", Tensor::uniform(N_KINDS, h, 0.1, &mut rng))?;
        p.add("lstm.wx", Tensor::xavier(4 * h, h, &mut rng))?;
        p.add("lstm.wh", Tensor::xavier(4 * h, h, &mut rng))?;
        let mut lb = Tensor::zeros(1, 4 * h);
        // Forget gate starts open.
        for c in h..2 * h {
            lb.data_mut()[c] = T::one();
        }
        p.add("lstm.b", lb)?;
        for l in 0..config.n_layers {
            for r in 0..RelationKind::N_MESSAGE_TYPES {
                p.add(rel_name(l, r), Tensor::xavier(h, h, &mut rng))?;
            }
            p.add(format!("ln.{l}.gamma"), Tensor::filled(1, h, T::one()))?;
            p.add(format!("ln.{l}.beta"), Tensor::zeros(1, h))?;
        }
        p.add("ag.w", Tensor::xavier(h, h, &mut rng))?;
        p.add("ag.b", Tensor::zeros(1, h))?;
        p.add("merge.w", Tensor::xavier(h, 2 * h, &mut rng))?;
        p.add("merge.b", Tensor::zeros(1, h))?;
        for (name, out) in HEAD_NAMES.iter().zip([AgentAct::COUNT, 1, 1, 1]) {
            p.add(format!("head.{name}.w1"), Tensor::xavier(h, h, &mut rng))?;
            p.add(format!("head.{name}.b1"), Tensor::zeros(1, h))?;
            p.add(format!("head.{name}.w2"), Tensor::xavier(out, h, &mut rng))?;
            p.add(format!("head.{name}.b2"), Tensor::zeros(1, out))?;
        }
        let ids = Ids::lookup(&p, config.n_layers)?;
        Ok(Self { config, params: p, ids })
    }

    pub fn from_params(config: UmgrConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let ids = Ids::lookup(&params, config.n_layers)?;
        let h = config.hidden;
        if params.get(ids.kind_emb).shape() != [N_KINDS, h] {
            return Err(Error::Config(format!("checkpoint hidden size does not match {h}")));
        }
        Ok(Self { config, params, ids })
    }

    fn mlp(&self, tape: &mut Tape<T>, b: &Bound, m: &Mlp, x: Var) -> Var {
        let y = tape.linear(x, b.var(m.w1), b.var(m.b1));
        let y = tape.gelu(y);
        tape.linear(y, b.var(m.w2), b.var(m.b2))
    }

    /// Final LSTM hidden state per sequence (`B x H`); sequences are
    /// left-padded and masked so padding never touches the state.
    fn encode(&self, tape: &mut Tape<T>, b: &Bound, seqs: &[Vec<usize>]) -> Var {
        let h = self.config.hidden;
        let n = seqs.len();
        let steps = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut hs = tape.constant(Tensor::zeros(n, h));
        if steps == 0 {
            return hs;
        }
        let mut cs = tape.constant(Tensor::zeros(n, h));
        for t in 0..steps {
            let active: Vec<bool> = seqs.iter().map(|s| t + s.len() >= steps).collect();
            let toks: Vec<usize> = seqs
                .iter()
                .map(|s| {
                    if t + s.len() >= steps {
                        s[t + s.len() - steps]
                    } else {
                        Act::INIT_TOKEN
                    }
                })
                .collect();
            let x = tape.gather_rows(b.var(self.ids.act_emb), &toks);
            let gx = tape.matmul_t(x, b.var(self.ids.lstm_wx));
            let gh = tape.matmul_t(hs, b.var(self.ids.lstm_wh));
            let g = tape.add(gx, gh);
            let g = tape.add_row(g, b.var(self.ids.lstm_b));
            let i = tape.slice_cols(g, 0, h);
            let f = tape.slice_cols(g, h, 2 * h);
            let c_in = tape.slice_cols(g, 2 * h, 3 * h);
            let o = tape.slice_cols(g, 3 * h, 4 * h);
            let i = tape.sigmoid(i);
            let f = tape.sigmoid(f);
            let c_in = tape.tanh(c_in);
            let o = tape.sigmoid(o);
            let fc = tape.mul(f, cs);
            let ic = tape.mul(i, c_in);
            let c_new = tape.add(fc, ic);
            let tc = tape.tanh(c_new);
            let h_new = tape.mul(o, tc);
            if active.iter().all(|a| *a) {
                cs = c_new;
                hs = h_new;
            } else {
                let mut m = Tensor::zeros(n, h);
                for (r, a) in active.iter().enumerate() {
                    if *a {
                        m.row_mut(r).iter_mut().for_each(|x| *x = T::one());
                    }
                }
                let m = tape.constant(m);
                let blend = |tape: &mut Tape<T>, new: Var, old: Var| {
                    let neg = tape.scale(old, -T::one());
                    let d = tape.add(new, neg);
                    let d = tape.mul(m, d);
                    tape.add(old, d)
                };
                cs = blend(tape, c_new, cs);
                hs = blend(tape, h_new, hs);
            }
        }
        hs
    }

    /// Entity states after every graph-convolution layer (`n x H`).
    fn convolve(&self, tape: &mut Tape<T>, b: &Bound, batch: &Batch) -> Var {
        let h = self.config.hidden;
        let mut x = tape.gather_rows(b.var(self.ids.kind_emb), &batch.kinds);
        for l in 0..self.config.n_layers {
            let mut parts = Vec::new();
            for (r, (dst, srcs)) in batch.messages.iter().enumerate() {
                if dst.is_empty() {
                    continue;
                }
                let adj = SparseRows::mean_of(batch.n, srcs.clone());
                let m = tape.spmm(adj, x);
                let m = tape.matmul_t(m, b.var(self.ids.rel[l][r]));
                parts.push((m, dst.clone()));
            }
            let msg = tape.scatter_rows(batch.n, h, parts);
            let msg = tape.gelu(msg);
            let y = tape.add(x, msg);
            let (g, be) = self.ids.ln[l];
            x = tape.layer_norm(y, b.var(g), b.var(be));
        }
        x
    }

    pub fn forward(&self, tape: &mut Tape<T>, b: &Bound, batch: &Batch) -> ForwardVars {
        let states = self.convolve(tape, b, batch);
        let context = self.encode(tape, b, &batch.tokens);
        let pooled = tape.spmm(SparseRows::mean_of(batch.n, batch.agg.clone()), states);
        let aggregate = tape.linear(pooled, b.var(self.ids.ag_w), b.var(self.ids.ag_b));
        let cat = tape.concat_cols(context, aggregate);
        let merged = tape.linear(cat, b.var(self.ids.merge_w), b.var(self.ids.merge_b));
        let act_logits = self.mlp(tape, b, &self.ids.heads[0], merged);
        let mut heads = [None, None, None];
        for (k, slot) in heads.iter_mut().enumerate() {
            if batch.heads[k].is_empty() {
                continue;
            }
            let rows: Vec<usize> = batch.heads[k].iter().map(|(r, _, _)| *r).collect();
            let x = tape.gather_rows(states, &rows);
            *slot = Some(self.mlp(tape, b, &self.ids.heads[k + 1], x));
        }
        ForwardVars {
            states,
            context,
            aggregate,
            act_logits,
            heads,
        }
    }

    /// Weighted multi-task loss of a labelled batch.
    pub fn loss(&self, tape: &mut Tape<T>, b: &Bound, batch: &Batch) -> LossVars {
        assert_eq!(batch.act_targets.len(), batch.len(), "loss needs labels");
        let f = self.forward(tape, b, batch);
        let act = tape.softmax_cross_entropy(f.act_logits, &batch.act_targets);
        let mut terms = [act; 4];
        for k in 0..3 {
            terms[k + 1] = match f.heads[k] {
                Some(logits) => {
                    let t: Vec<T> = batch.head_targets[k].iter().map(|y| T::lit(*y)).collect();
                    tape.binary_log_loss(logits, &t)
                }
                None => tape.constant(Tensor::scalar(T::zero())),
            };
        }
        let w = self.config.loss_weights;
        let mut total = tape.scale(terms[0], T::lit(w[0]));
        for k in 1..4 {
            let s = tape.scale(terms[k], T::lit(w[k]));
            total = tape.add(total, s);
        }
        LossVars { total, terms }
    }

    pub fn input(&self, graph: &MemoryGraph, masks: &PolicyMasks, acts: &[Act]) -> GraphInput {
        GraphInput::new(graph, masks, acts, &self.config)
    }

    /// Context vector for an act history (empty history encodes the start token).
    pub fn encode_context(&self, acts: &[Act]) -> Vec<T> {
        let mut tape = Tape::new();
        let b = self.params.bind_frozen(&mut tape);
        let toks = context_tokens(acts, self.config.act_history, self.config.max_acts);
        let v = self.encode(&mut tape, &b, &[toks]);
        tape.value(v).data().to_vec()
    }

    /// State table, one row per entity in message-graph order.
    pub fn rgcn_forward(&self, graph: &MemoryGraph) -> Tensor<T> {
        let masks = PolicyMasks::default();
        let input = GraphInput::new(graph, &masks, &[], &self.config);
        let batch = Batch::new(&[&input], None, true);
        let mut tape = Tape::new();
        let b = self.params.bind_frozen(&mut tape);
        let s = self.convolve(&mut tape, &b, &batch);
        tape.value(s).clone()
    }

    /// Mean of `W_ag h + b_ag` over the given state rows.
    pub fn aggregate_graph(&self, states: &Tensor<T>, rows: &[usize]) -> Vec<T> {
        let mut tape = Tape::new();
        let b = self.params.bind_frozen(&mut tape);
        let s = tape.constant(states.clone());
        let pooled = tape.spmm(SparseRows::mean_of(states.rows(), vec![rows.to_vec()]), s);
        let v = tape.linear(pooled, b.var(self.ids.ag_w), b.var(self.ids.ag_b));
        tape.value(v).data().to_vec()
    }

    pub fn predict_policy(&self, graph: &MemoryGraph, masks: &PolicyMasks, acts: &[Act]) -> Result<Policy> {
        if masks.items.is_empty() {
            return Err(Error::DegeneratePolicy("empty item mask".into()));
        }
        let input = self.input(graph, masks, acts);
        Ok(self.predict_batch(&[&input]).pop().expect("one policy"))
    }

    pub fn predict_batch(&self, inputs: &[&GraphInput]) -> Vec<Policy> {
        let batch = Batch::new(inputs, None, true);
        let mut tape = Tape::new();
        let b = self.params.bind_frozen(&mut tape);
        let f = self.forward(&mut tape, &b, &batch);
        let logits = tape.value(f.act_logits);
        let mut out: Vec<Policy> = (0..batch.len())
            .map(|r| {
                let row: Vec<f64> = logits.row(r).iter().map(|v| v.as_f64()).collect();
                let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
                let mut p = Policy::default();
                for (k, v) in row.iter().enumerate() {
                    p.act_probs[k] = (v - mx).exp() / z;
                }
                p
            })
            .collect();
        for k in 0..3 {
            let Some(v) = f.heads[k] else { continue };
            let vals = tape.value(v).data();
            for ((_, ex, e), z) in batch.heads[k].iter().zip(vals) {
                let s = 1.0 / (1.0 + (-z.as_f64()).exp());
                let map = match k {
                    0 => &mut out[*ex].items,
                    1 => &mut out[*ex].slots,
                    _ => &mut out[*ex].values,
                };
                map.insert(*e, s);
            }
        }
        out
    }

    pub fn kind_row(kind: EntityKind) -> usize {
        kind as usize
    }

    fn sidecar(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".config.json");
        PathBuf::from(s)
    }

    /// Parameters at `path`, config at `path` + `.config.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.params, path)?;
        std::fs::write(Self::sidecar(path), serde_json::to_string_pretty(&self.config)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config: UmgrConfig = serde_json::from_str(&std::fs::read_to_string(Self::sidecar(path))?)?;
        let params = checkpoint::load(path)?;
        Self::from_params(config, params)
    }
}
