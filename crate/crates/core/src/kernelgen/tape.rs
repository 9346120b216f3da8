//! Register-machine tapes compiled from collision rules.
//!
//! Instruction order mirrors `symexpr::evaluate` exactly, so a tape produces
//! bit-identical results to evaluating the rule assignment by assignment.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Signed};
use rayon::prelude::*;

use super::{BoundRule, Field, KernelError};
use crate::symexpr::{negated_product, product_parts, rational_to_f64, Env, Expr, Node, Rational, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Log,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub type Reg = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instr {
    /// Input population `read` (index into the bound rule's reads).
    Load { dst: Reg, read: u32 },
    Const { dst: Reg, value: f64 },
    Param { dst: Reg, slot: u32 },
    Unary { dst: Reg, op: UnaryOp, a: Reg },
    Binary { dst: Reg, op: BinaryOp, a: Reg, b: Reg },
    /// Output `write` (index into the bound rule's writes) from `src`.
    Store { src: Reg, write: u32 },
}

#[derive(Debug, Clone)]
pub struct KernelTape {
    pub instrs: Vec<Instr>,
    pub registers: usize,
    pub params: Vec<Symbol>,
    pub bound: BoundRule,
    tables: Arc<Mutex<Option<Arc<NeighborTables>>>>,
}

/// Periodic neighbor indices per field access (`None` for the cell itself),
/// built once per field shape.
#[derive(Debug)]
struct NeighborTables {
    dims: Vec<usize>,
    reads: Vec<Option<Vec<u32>>>,
    writes: Vec<Option<Vec<u32>>>,
}

struct Compiler<'a> {
    instrs: Vec<Instr>,
    next: Reg,
    vars: HashMap<Symbol, Reg>,
    params: &'a [Symbol],
}

impl Compiler<'_> {
    fn fresh(&mut self) -> Reg {
        let r = self.next;
        self.next += 1;
        r
    }

    fn constant(&mut self, value: f64) -> Reg {
        let dst = self.fresh();
        self.instrs.push(Instr::Const { dst, value });
        dst
    }

    fn unary(&mut self, op: UnaryOp, a: Reg) -> Reg {
        let dst = self.fresh();
        self.instrs.push(Instr::Unary { dst, op, a });
        dst
    }

    fn binary(&mut self, op: BinaryOp, a: Reg, b: Reg) -> Reg {
        let dst = self.fresh();
        self.instrs.push(Instr::Binary { dst, op, a, b });
        dst
    }

    fn int_pow(&mut self, v: Reg, n: i64) -> Reg {
        let mut acc = v;
        for _ in 1..n {
            acc = self.binary(BinaryOp::Mul, acc, v);
        }
        acc
    }

    fn expr(&mut self, e: &Expr) -> Result<Reg, KernelError> {
        Ok(match e.node() {
            Node::Num(r) => self.constant(rational_to_f64(r)),
            Node::Sym(s) => match self.vars.get(s) {
                Some(r) => *r,
                None => match self.params.iter().position(|p| p == s) {
                    Some(slot) => {
                        let dst = self.fresh();
                        self.instrs.push(Instr::Param { dst, slot: slot as u32 });
                        self.vars.insert(s.clone(), dst);
                        dst
                    }
                    None => return Err(KernelError::UnboundSymbol(s.name().to_string())),
                },
            },
            Node::Add(ts) => {
                let mut acc = self.expr(&ts[0])?;
                for t in &ts[1..] {
                    acc = match negated_product(t) {
                        Some(fs) => {
                            let v = self.product(fs, true)?;
                            self.binary(BinaryOp::Sub, acc, v)
                        }
                        None => {
                            let v = self.expr(t)?;
                            self.binary(BinaryOp::Add, acc, v)
                        }
                    };
                }
                acc
            }
            Node::Mul(fs) => self.product(fs, false)?,
            Node::Pow(b, n) => {
                let v = self.expr(b)?;
                if *n > 0 {
                    self.int_pow(v, *n)
                } else {
                    let p = self.int_pow(v, -n);
                    let one = self.constant(1.0);
                    self.binary(BinaryOp::Div, one, p)
                }
            }
            Node::Log(a) => {
                let v = self.expr(a)?;
                self.unary(UnaryOp::Log, v)
            }
            Node::Exp(a) => {
                let v = self.expr(a)?;
                self.unary(UnaryOp::Exp, v)
            }
        })
    }

    fn product(&mut self, fs: &[Expr], absolute: bool) -> Result<Reg, KernelError> {
        let (coeff, num, den) = product_parts(fs);
        let mut c = coeff.cloned().unwrap_or_else(Rational::one);
        if absolute {
            c = c.abs();
        }
        let negate = c == -Rational::one();
        let mut acc = if c.is_one() || negate { None } else { Some(self.constant(rational_to_f64(&c))) };
        for f in num {
            let v = self.expr(f)?;
            acc = Some(match acc {
                Some(a) => self.binary(BinaryOp::Mul, a, v),
                None => v,
            });
        }
        for (b, n) in den {
            let v = self.expr(b)?;
            let v = self.int_pow(v, n);
            let a = match acc {
                Some(a) => a,
                None => self.constant(1.0),
            };
            acc = Some(self.binary(BinaryOp::Div, a, v));
        }
        let v = match acc {
            Some(v) => v,
            None => self.constant(1.0),
        };
        Ok(if negate { self.unary(UnaryOp::Neg, v) } else { v })
    }
}

/// Compiles a bound rule. Free symbols other than the inputs become scalar
/// parameters (sorted by name).
pub fn compile_tape(bound: &BoundRule) -> Result<KernelTape, KernelError> {
    let rule = &bound.rule;
    if !rule.assignments.toposort_check() {
        return Err(KernelError::NotTopological);
    }
    let params = rule.parameters();
    let mut c = Compiler { instrs: Vec::new(), next: 0, vars: HashMap::new(), params: &params };
    for (k, s) in rule.inputs.iter().enumerate() {
        let dst = c.fresh();
        c.instrs.push(Instr::Load { dst, read: k as u32 });
        c.vars.insert(s.clone(), dst);
    }
    for a in rule.assignments.iter() {
        let r = c.expr(&a.rhs)?;
        c.vars.insert(a.lhs.clone(), r);
    }
    for (k, s) in rule.outputs.iter().enumerate() {
        let src = *c.vars.get(s).ok_or_else(|| KernelError::UnboundSymbol(s.name().to_string()))?;
        c.instrs.push(Instr::Store { src, write: k as u32 });
    }
    let (instrs, registers) = allocate_registers(c.instrs, c.next as usize);
    Ok(KernelTape { registers, instrs, params, bound: bound.clone(), tables: Arc::default() })
}

fn operands(ins: &Instr) -> [Option<Reg>; 2] {
    match *ins {
        Instr::Unary { a, .. } => [Some(a), None],
        Instr::Binary { a, b, .. } => [Some(a), Some(b)],
        Instr::Store { src, .. } => [Some(src), None],
        _ => [None, None],
    }
}

fn target(ins: &mut Instr) -> Option<&mut Reg> {
    match ins {
        Instr::Load { dst, .. } | Instr::Const { dst, .. } | Instr::Param { dst, .. } => Some(dst),
        Instr::Unary { dst, .. } | Instr::Binary { dst, .. } => Some(dst),
        Instr::Store { .. } => None,
    }
}

/// Linear-scan reuse of virtual registers whose last read has passed.
fn allocate_registers(mut instrs: Vec<Instr>, virtual_regs: usize) -> (Vec<Instr>, usize) {
    let mut last_use = vec![usize::MAX; virtual_regs];
    for (k, ins) in instrs.iter().enumerate() {
        for r in operands(ins).into_iter().flatten() {
            last_use[r as usize] = k;
        }
    }
    let mut map = vec![Reg::MAX; virtual_regs];
    let mut free: Vec<Reg> = Vec::new();
    let mut count: Reg = 0;
    for k in 0..instrs.len() {
        let ops = operands(&instrs[k]);
        let ins = &mut instrs[k];
        match ins {
            Instr::Unary { a, .. } => *a = map[*a as usize],
            Instr::Binary { a, b, .. } => {
                *a = map[*a as usize];
                *b = map[*b as usize];
            }
            Instr::Store { src, .. } => *src = map[*src as usize],
            _ => {}
        }
        // operands dying here free their slots before the result is placed
        for r in ops.into_iter().flatten() {
            if last_use[r as usize] == k && map[r as usize] != Reg::MAX {
                let phys = map[r as usize];
                if !free.contains(&phys) {
                    free.push(phys);
                }
            }
        }
        if let Some(dst) = target(ins) {
            let v = *dst as usize;
            let phys = free.pop().unwrap_or_else(|| {
                count += 1;
                count - 1
            });
            map[v] = phys;
            *dst = phys;
            if last_use[v] == usize::MAX {
                free.push(phys);
            }
        }
    }
    (instrs, count as usize)
}

const BATCH: usize = 64;

/// Raw destination pointer shared across worker threads. Every cell writes
/// a set of slots disjoint from every other cell's (own slots for pull,
/// a bijective shift per population slab for push).
#[derive(Clone, Copy)]
struct SharedDst(*mut f64);
unsafe impl Send for SharedDst {}
unsafe impl Sync for SharedDst {}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("LBMFORGE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
            if n > 0 {
                b = b.num_threads(n);
            }
        }
        b.build().expect("thread pool")
    })
}

impl KernelTape {
    pub fn instruction_count(&self) -> usize {
        self.instrs.len()
    }

    pub fn count_unary(&self, op: UnaryOp) -> usize {
        self.instrs.iter().filter(|i| matches!(i, Instr::Unary { op: o, .. } if *o == op)).count()
    }

    pub fn param_values(&self, params: &Env) -> Result<Vec<f64>, KernelError> {
        self.params
            .iter()
            .map(|p| params.get(p).copied().ok_or_else(|| KernelError::MissingParameter(p.name().to_string())))
            .collect()
    }

    /// Runs the tape on a single cell's inputs.
    pub fn run_cell(&self, inputs: &[f64], params: &Env) -> Result<Vec<f64>, KernelError> {
        let pv = self.param_values(params)?;
        let mut regs = vec![0.0; self.registers];
        let mut out = vec![0.0; self.bound.writes.len()];
        for ins in &self.instrs {
            match *ins {
                Instr::Load { dst, read } => regs[dst as usize] = inputs[read as usize],
                Instr::Const { dst, value } => regs[dst as usize] = value,
                Instr::Param { dst, slot } => regs[dst as usize] = pv[slot as usize],
                Instr::Unary { dst, op, a } => regs[dst as usize] = unary(op, regs[a as usize]),
                Instr::Binary { dst, op, a, b } => regs[dst as usize] = binary(op, regs[a as usize], regs[b as usize]),
                Instr::Store { src, write } => out[write as usize] = regs[src as usize],
            }
        }
        Ok(out)
    }

    fn neighbor_tables(&self, f: &Field) -> Arc<NeighborTables> {
        let mut guard = self.tables.lock().expect("neighbor table lock");
        if let Some(t) = guard.as_ref() {
            if t.dims == f.dims() {
                return t.clone();
            }
        }
        let build = |accs: &[super::FieldAccess]| -> Vec<Option<Vec<u32>>> {
            accs.iter()
                .map(|a| {
                    (a.offset != [0; 3]).then(|| (0..f.cells()).map(|c| f.neighbor(c, a.offset) as u32).collect())
                })
                .collect()
        };
        let t = Arc::new(NeighborTables {
            dims: f.dims().to_vec(),
            reads: build(&self.bound.reads),
            writes: build(&self.bound.writes),
        });
        *guard = Some(t.clone());
        t
    }

    /// One collide-and-stream step from `src` into `dst`.
    pub fn execute_step(&self, src: &Field, dst: &mut Field, params: &Env) -> Result<(), KernelError> {
        let q = self.bound.rule.method.stencil.q();
        if !src.compatible(dst) || src.q() != q || src.dim() != self.bound.rule.method.stencil.dim {
            return Err(KernelError::DimensionMismatch);
        }
        let pv = self.param_values(params)?;
        let tables = self.neighbor_tables(src);
        let cells = src.cells();
        let out = SharedDst(dst.data_mut().as_mut_ptr());
        let chunks: Vec<usize> = (0..cells).step_by(BATCH).collect();
        pool().install(|| {
            chunks.par_iter().for_each_init(
                || vec![0.0f64; self.registers * BATCH],
                |regs, &start| {
                    let n = BATCH.min(cells - start);
                    // SAFETY: writes of distinct cells never alias (see SharedDst).
                    unsafe { self.run_batch(src, out, &tables, &pv, regs, start, n) }
                },
            )
        });
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    unsafe fn run_batch(
        &self,
        src: &Field,
        out: SharedDst,
        tables: &NeighborTables,
        pv: &[f64],
        regs: &mut [f64],
        start: usize,
        n: usize,
    ) {
        let cells = src.cells();
        let data = src.data();
        for ins in &self.instrs {
            match *ins {
                Instr::Load { dst, read } => {
                    let base = self.bound.reads[read as usize].index * cells;
                    let r = &mut regs[dst as usize * BATCH..][..n];
                    match &tables.reads[read as usize] {
                        None => r.copy_from_slice(&data[base + start..base + start + n]),
                        Some(t) => {
                            for (v, c) in r.iter_mut().zip(&t[start..start + n]) {
                                *v = data[base + *c as usize];
                            }
                        }
                    }
                }
                Instr::Const { dst, value } => regs[dst as usize * BATCH..][..n].fill(value),
                Instr::Param { dst, slot } => regs[dst as usize * BATCH..][..n].fill(pv[slot as usize]),
                Instr::Unary { dst, op, a } => {
                    for l in 0..n {
                        regs[dst as usize * BATCH + l] = unary(op, regs[a as usize * BATCH + l]);
                    }
                }
                Instr::Binary { dst, op, a, b } => {
                    let (d, a, b) = (dst as usize * BATCH, a as usize * BATCH, b as usize * BATCH);
                    match op {
                        BinaryOp::Add => (0..n).for_each(|l| regs[d + l] = regs[a + l] + regs[b + l]),
                        BinaryOp::Sub => (0..n).for_each(|l| regs[d + l] = regs[a + l] - regs[b + l]),
                        BinaryOp::Mul => (0..n).for_each(|l| regs[d + l] = regs[a + l] * regs[b + l]),
                        BinaryOp::Div => (0..n).for_each(|l| regs[d + l] = regs[a + l] / regs[b + l]),
                    }
                }
                Instr::Store { src: s, write } => {
                    let base = self.bound.writes[write as usize].index * cells;
                    let r = &regs[s as usize * BATCH..][..n];
                    match &tables.writes[write as usize] {
                        None => {
                            for (l, v) in r.iter().enumerate() {
                                *out.0.add(base + start + l) = *v;
                            }
                        }
                        Some(t) => {
                            for (v, c) in r.iter().zip(&t[start..start + n]) {
                                *out.0.add(base + *c as usize) = *v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn unary(op: UnaryOp, a: f64) -> f64 {
    match op {
        UnaryOp::Neg => -a,
        UnaryOp::Log => a.ln(),
        UnaryOp::Exp => a.exp(),
    }
}

fn binary(op: BinaryOp, a: f64, b: f64) -> f64 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => a / b,
    }
}
