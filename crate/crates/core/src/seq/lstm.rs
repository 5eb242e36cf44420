//! LSTM forward pass, manual backpropagation through time and the
//! next-movie softmax losses.
//!
//! Gates are stacked `[i, f, g, o]` in `W_x (4h x D)`, `W_h (4h x h)` and
//! `b (4h)`; the final projection is `y = P h + p` with `P (D x h)`.
//! `D = 5d` is the movie-embedding width.

use rand::seq::index::sample;
use rand::Rng as _;

use super::{Catalog, FrozenTable, MovieRecord, SeqError, Variant};
use crate::linalg::{dot, log_sum_exp, sigmoid};
use crate::rng;

/// Offsets of each parameter block in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub d: usize,
    pub h: usize,
    pub concat: bool,
}

impl Layout {
    pub fn new(d: usize, h: usize, variant: Variant) -> Self {
        Layout {
            d,
            h,
            concat: variant == Variant::ActorConcat,
        }
    }

    pub fn input(&self) -> usize {
        5 * self.d
    }

    pub fn wx(&self) -> usize {
        0
    }

    pub fn wh(&self) -> usize {
        self.wx() + 4 * self.h * self.input()
    }

    pub fn b(&self) -> usize {
        self.wh() + 4 * self.h * self.h
    }

    pub fn p(&self) -> usize {
        self.b() + 4 * self.h
    }

    pub fn pb(&self) -> usize {
        self.p() + self.input() * self.h
    }

    /// Actor concat map `d x 3d`, present only for the concat variant.
    pub fn a_actor(&self) -> usize {
        self.pb() + self.input()
    }

    pub fn a_role(&self) -> usize {
        self.a_actor() + self.map_len()
    }

    fn map_len(&self) -> usize {
        if self.concat {
            3 * self.d * self.d
        } else {
            0
        }
    }

    pub fn len(&self) -> usize {
        self.a_role() + self.map_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Initial parameters: LSTM and projection weights uniform in
    /// `+-1/sqrt(h)`, zero biases except forget gates at 1, and concat maps
    /// that average the three slots.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, "seq-init", 0);
        let mut p = vec![0.0; self.len()];
        let bound = 1.0 / (self.h as f64).sqrt();
        for x in &mut p[self.wx()..self.b()] {
            *x = r.random_range(-bound..bound);
        }
        for x in &mut p[self.b() + self.h..self.b() + 2 * self.h] {
            *x = 1.0;
        }
        for x in &mut p[self.p()..self.pb()] {
            *x = r.random_range(-bound..bound);
        }
        if self.concat {
            let d = self.d;
            for base in [self.a_actor(), self.a_role()] {
                for row in 0..d {
                    for slot in 0..3 {
                        p[base + row * 3 * d + slot * d + row] = 1.0 / 3.0;
                    }
                }
            }
        }
        p
    }
}

/// Table rows chosen for one movie.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovieSample {
    pub actors: Vec<usize>,
    pub roles: Vec<usize>,
    pub genre: usize,
    pub year: usize,
    pub rank: usize,
}

/// Picks the table rows that represent `movie` under `variant`.
///
/// Single-actor variants draw one cast entry; the sampling variants draw
/// three distinct entries (with replacement when the cast is smaller); the
/// popular variant takes the three most frequent actors. Missing data maps
/// to the padding row.
pub fn select(movie: &MovieRecord, catalog: &Catalog, table: &FrozenTable, variant: Variant, r: &mut rng::Rng) -> MovieSample {
    let cast: Vec<(String, String)> = match variant {
        Variant::Plain | Variant::Joint => {
            if movie.cast.is_empty() {
                Vec::new()
            } else {
                vec![movie.cast[r.random_range(0..movie.cast.len())].clone()]
            }
        }
        Variant::ActorAvg | Variant::ActorConcat => {
            let n = movie.cast.len();
            if n == 0 {
                Vec::new()
            } else if n >= 3 {
                sample(r, n, 3).into_iter().map(|i| movie.cast[i].clone()).collect()
            } else {
                let mut v = movie.cast.clone();
                while v.len() < 3 {
                    v.push(movie.cast[r.random_range(0..n)].clone());
                }
                v
            }
        }
        Variant::Popular => catalog.popular_cast(movie, 3),
    };
    let slots = if variant == Variant::ActorConcat { 3 } else { cast.len().max(1) };
    let mut actors: Vec<usize> = cast.iter().map(|(a, _)| table.id(a)).collect();
    let mut roles: Vec<usize> = cast.iter().map(|(_, ro)| table.id(ro)).collect();
    actors.resize(slots, 0);
    roles.resize(slots, 0);
    let genre = if movie.genres.is_empty() {
        0
    } else {
        table.id(&movie.genres[r.random_range(0..movie.genres.len())])
    };
    MovieSample {
        actors,
        roles,
        genre,
        year: table.id(&movie.year_token),
        rank: movie.rank_token.as_deref().map_or(0, |t| table.id(t)),
    }
}

fn mean_rows(table: &FrozenTable, rows: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for &i in rows {
        for (o, v) in out.iter_mut().zip(table.row(i)) {
            *o += v;
        }
    }
    let n = rows.len().max(1) as f64;
    out.iter_mut().for_each(|x| *x /= n);
}

fn concat_rows(table: &FrozenTable, rows: &[usize]) -> Vec<f64> {
    rows.iter().flat_map(|&i| table.row(i).iter().copied()).collect()
}

/// Movie embedding `[actor, role, genre, year, rank]`, each of width `d`.
pub fn embed(s: &MovieSample, table: &FrozenTable, params: &[f64], l: &Layout) -> Vec<f64> {
    let d = l.d;
    let mut out = vec![0.0; 5 * d];
    if l.concat {
        for (slot, (rows, base)) in [(&s.actors, l.a_actor()), (&s.roles, l.a_role())].into_iter().enumerate() {
            let x = concat_rows(table, rows);
            matvec(&params[base..base + 3 * d * d], d, 3 * d, &x, &mut out[slot * d..(slot + 1) * d]);
        }
    } else {
        mean_rows(table, &s.actors, &mut out[0..d]);
        mean_rows(table, &s.roles, &mut out[d..2 * d]);
    }
    out[2 * d..3 * d].copy_from_slice(table.row(s.genre));
    out[3 * d..4 * d].copy_from_slice(table.row(s.year));
    out[4 * d..5 * d].copy_from_slice(table.row(s.rank));
    out
}

/// Accumulates the parameter gradient of [`embed`] given `g = dL/d embed`.
/// Only the concat maps depend on parameters; the table is frozen.
pub fn embed_backward(s: &MovieSample, table: &FrozenTable, l: &Layout, g: &[f64], grad: &mut [f64]) {
    if !l.concat {
        return;
    }
    let d = l.d;
    for (slot, (rows, base)) in [(&s.actors, l.a_actor()), (&s.roles, l.a_role())].into_iter().enumerate() {
        let x = concat_rows(table, rows);
        outer_add(&mut grad[base..base + 3 * d * d], &g[slot * d..(slot + 1) * d], &x, 1.0);
    }
}

/// `out = M x` for row-major `M (rows x cols)`.
fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// `out += M^T y`
fn matvec_t_add(m: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *o += yr * v;
        }
    }
}

/// `M += s * a b^T`
fn outer_add(m: &mut [f64], a: &[f64], b: &[f64], s: f64) {
    let cols = b.len();
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        for (x, bv) in m[r * cols..(r + 1) * cols].iter_mut().zip(b) {
            *x += s * ar * bv;
        }
    }
}

/// Saved activations of one time step.
#[derive(Debug, Clone)]
pub struct Step {
    pub x: Vec<f64>,
    /// Gate activations `[i, f, g, o]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    /// Projected output `P h + p`.
    pub y: Vec<f64>,
}

/// Runs the recurrence over `xs` from zero state.
pub fn forward(params: &[f64], l: &Layout, xs: &[Vec<f64>]) -> Vec<Step> {
    let (h, dim) = (l.h, l.input());
    let wx = &params[l.wx()..l.wh()];
    let wh = &params[l.wh()..l.b()];
    let b = &params[l.b()..l.p()];
    let p = &params[l.p()..l.pb()];
    let pb = &params[l.pb()..l.a_actor()];
    let mut steps: Vec<Step> = Vec::with_capacity(xs.len());
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut z = vec![0.0; 4 * h];
    let mut zh = vec![0.0; 4 * h];
    for x in xs {
        matvec(wx, 4 * h, dim, x, &mut z);
        matvec(wh, 4 * h, h, &h_prev, &mut zh);
        let mut gates = vec![0.0; 4 * h];
        for k in 0..4 * h {
            let v = z[k] + zh[k] + b[k];
            gates[k] = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(v) };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hh = vec![0.0; h];
        for j in 0..h {
            c[j] = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
            tanh_c[j] = c[j].tanh();
            hh[j] = gates[3 * h + j] * tanh_c[j];
        }
        let mut y = vec![0.0; dim];
        matvec(p, dim, h, &hh, &mut y);
        for (yj, bj) in y.iter_mut().zip(pb) {
            *yj += bj;
        }
        h_prev.clone_from(&hh);
        c_prev.clone_from(&c);
        steps.push(Step {
            x: x.clone(),
            gates,
            c,
            tanh_c,
            h: hh,
            y,
        });
    }
    steps
}

/// Backpropagation through time. `dys[t]` is `dL/dy_t` (empty slices skip
/// a step). Accumulates parameter gradients into `grad` and returns
/// `dL/dx_t` per step.
pub fn backward(params: &[f64], l: &Layout, steps: &[Step], dys: &[Vec<f64>], grad: &mut [f64]) -> Vec<Vec<f64>> {
    let (h, dim) = (l.h, l.input());
    let wx = &params[l.wx()..l.wh()];
    let wh = &params[l.wh()..l.b()];
    let p = &params[l.p()..l.pb()];
    let (wx_o, wh_o, b_o, p_o, pb_o) = (l.wx(), l.wh(), l.b(), l.p(), l.pb());
    let mut dxs = vec![vec![0.0; dim]; steps.len()];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let zero_h = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let mut dh = dh_next.clone();
        if let Some(dy) = dys.get(t).filter(|v| !v.is_empty()) {
            outer_add(&mut grad[p_o..pb_o], dy, &s.h, 1.0);
            for (g, v) in grad[pb_o..pb_o + dim].iter_mut().zip(dy) {
                *g += v;
            }
            matvec_t_add(p, dim, h, dy, &mut dh);
        }
        let c_prev = if t > 0 { &steps[t - 1].c } else { &zero_h };
        let h_prev = if t > 0 { &steps[t - 1].h } else { &zero_h };
        let g = &s.gates;
        for j in 0..h {
            let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let d_o = dh[j] * s.tanh_c[j];
            let dc = dh[j] * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
            dz[j] = dc * gg * i * (1.0 - i);
            dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - gg * gg);
            dz[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        outer_add(&mut grad[wx_o..wh_o], &dz, &s.x, 1.0);
        outer_add(&mut grad[wh_o..b_o], &dz, h_prev, 1.0);
        for (gb, v) in grad[b_o..b_o + 4 * h].iter_mut().zip(&dz) {
            *gb += v;
        }
        matvec_t_add(wx, 4 * h, dim, &dz, &mut dxs[t]);
        dh_next.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_add(wh, 4 * h, h, &dz, &mut dh_next);
    }
    dxs
}

/// `-log softmax([y.pos, y.neg_1, ...])[0]`.
pub fn step_loss(y: &[f64], pos: &[f64], negs: &[&[f64]]) -> Result<f64, SeqError> {
    Ok(step_loss_grad(y, pos, negs)?.0)
}

/// Loss, `dL/dy` and the gradient for each candidate.
pub type StepGrad = (f64, Vec<f64>, Vec<Vec<f64>>);

/// Step loss with `dL/dy` and `dL/d candidate` (positive first).
pub fn step_loss_grad(y: &[f64], pos: &[f64], negs: &[&[f64]]) -> Result<StepGrad, SeqError> {
    let cands: Vec<&[f64]> = std::iter::once(pos).chain(negs.iter().copied()).collect();
    if cands.iter().any(|c| c.len() != y.len()) {
        return Err(SeqError::Alignment("candidate width differs from output".into()));
    }
    let logits: Vec<f64> = cands.iter().map(|c| dot(y, c)).collect();
    if y.iter().any(|v| !v.is_finite()) || logits.iter().any(|v| !v.is_finite()) {
        return Err(SeqError::NonFinite("step loss input".into()));
    }
    let lse = log_sum_exp(&logits);
    // shifting by the positive logit avoids cancellation for confident steps
    let shifted: Vec<f64> = logits.iter().map(|z| z - logits[0]).collect();
    let loss = log_sum_exp(&shifted);
    let probs: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    let mut dy: Vec<f64> = pos.iter().map(|v| -v).collect();
    for (p, c) in probs.iter().zip(&cands) {
        for (g, v) in dy.iter_mut().zip(c.iter()) {
            *g += p * v;
        }
    }
    let dc = probs
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let coef = p - if j == 0 { 1.0 } else { 0.0 };
            y.iter().map(|v| coef * v).collect()
        })
        .collect();
    Ok((loss, dy, dc))
}

/// Sum of step losses of each projected state against its target.
pub fn joint_loss(ys: &[Vec<f64>], targets: &[Vec<f64>], negatives: &[Vec<Vec<f64>>]) -> Result<f64, SeqError> {
    if ys.len() != targets.len() || ys.len() != negatives.len() {
        return Err(SeqError::Alignment(format!(
            "{} states, {} targets, {} negative sets",
            ys.len(),
            targets.len(),
            negatives.len()
        )));
    }
    let mut total = 0.0;
    for ((y, t), n) in ys.iter().zip(targets).zip(negatives) {
        let negs: Vec<&[f64]> = n.iter().map(Vec::as_slice).collect();
        total += step_loss(y, t, &negs)?;
    }
    Ok(total)
}

/// A training example: input movies, the next movie, and negatives.
///
/// `negatives` holds one set reused at every step, or one set per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub inputs: Vec<MovieSample>,
    pub target: MovieSample,
    pub negatives: Vec<Vec<MovieSample>>,
}

/// Loss of a window and, when `grad` is given, its accumulated gradient.
///
/// With `joint`, state `t` predicts input `t + 1` and the last state
/// predicts the target; otherwise only the last state is scored.
pub fn window_loss(
    params: &[f64],
    l: &Layout,
    table: &FrozenTable,
    w: &Window,
    joint: bool,
    grad: Option<&mut [f64]>,
) -> Result<f64, SeqError> {
    let n = w.inputs.len();
    if n == 0 || w.negatives.is_empty() {
        return Err(SeqError::Alignment("window needs inputs and negatives".into()));
    }
    let xs: Vec<Vec<f64>> = w.inputs.iter().map(|s| embed(s, table, params, l)).collect();
    let target = embed(&w.target, table, params, l);
    let negs: Vec<Vec<Vec<f64>>> = w
        .negatives
        .iter()
        .map(|set| set.iter().map(|s| embed(s, table, params, l)).collect())
        .collect();
    let steps = forward(params, l, &xs);
    let scored: Vec<usize> = if joint { (0..n).collect() } else { vec![n - 1] };
    let mut loss = 0.0;
    let mut dys = vec![Vec::new(); n];
    // gradients w.r.t. target-side embeddings: (sample, dL/d embedding)
    let mut cand_grads: Vec<(&MovieSample, Vec<f64>)> = Vec::new();
    for &t in &scored {
        let (pos_sample, pos) = if t + 1 < n {
            (&w.inputs[t + 1], &xs[t + 1])
        } else {
            (&w.target, &target)
        };
        let k = t.min(w.negatives.len() - 1);
        let nv: Vec<&[f64]> = negs[k].iter().map(Vec::as_slice).collect();
        let (lt, dy, dc) = step_loss_grad(&steps[t].y, pos, &nv)?;
        loss += lt;
        if l.concat {
            let mut it = dc.into_iter();
            cand_grads.push((pos_sample, it.next().expect("positive gradient")));
            for (s, g) in w.negatives[k].iter().zip(it) {
                cand_grads.push((s, g));
            }
        }
        dys[t] = dy;
    }
    if let Some(grad) = grad {
        let dxs = backward(params, l, &steps, &dys, grad);
        if l.concat {
            for (s, dx) in w.inputs.iter().zip(&dxs) {
                embed_backward(s, table, l, dx, grad);
            }
            for (s, g) in &cand_grads {
                embed_backward(s, table, l, g, grad);
            }
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln6() {
        let y = [0.0, 0.0];
        let v = [1.0, 2.0];
        let negs: Vec<&[f64]> = vec![&v; 5];
        assert!((step_loss(&y, &v, &negs).unwrap() - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn large_positive_gap_gives_tiny_loss() {
        let y = [1.0];
        let z: &[f64] = &[0.0];
        // five negatives at gap 20 leave ln(1 + 5 e^-20), just above 1e-8
        let loss = step_loss(&y, &[20.0], &[z; 5]).unwrap();
        assert!((loss / (5.0 * (-20f64).exp()).ln_1p() - 1.0).abs() < 1e-6);
        let loss = step_loss(&y, &[21.0], &[z; 5]).unwrap();
        assert!(loss < 1e-8 && loss > 0.0);
    }

    #[test]
    fn zero_weights_output_projection_bias() {
        let l = Layout { d: 2, h: 3, concat: false };
        let mut p = vec![0.0; l.len()];
        for (i, x) in p[l.pb()..l.a_actor()].iter_mut().enumerate() {
            *x = i as f64 * 0.5;
        }
        let xs = vec![vec![1.0; 10]; 4];
        let steps = forward(&p, &l, &xs);
        assert_eq!(steps.len(), 4);
        for s in &steps {
            assert_eq!(s.y, p[l.pb()..l.a_actor()].to_vec());
        }
    }

    #[test]
    fn joint_loss_alignment() {
        let y = vec![vec![0.0; 2]; 4];
        let t = vec![vec![1.0; 2]; 4];
        let n = vec![vec![vec![1.0; 2]; 5]; 4];
        assert!((joint_loss(&y, &t, &n).unwrap() - 4.0 * 6f64.ln()).abs() < 1e-12);
        assert!(joint_loss(&y, &t[..3], &n).is_err());
    }

    #[test]
    fn layout_blocks_are_contiguous() {
        let l = Layout { d: 2, h: 3, concat: true };
        assert_eq!(l.wh(), 4 * 3 * 10);
        assert_eq!(l.len(), l.a_role() + 12);
        let plain = Layout { d: 2, h: 3, concat: false };
        assert_eq!(plain.len(), plain.a_actor());
    }
}
