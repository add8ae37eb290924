//! Deterministic round-robin scheduler.
//!
//! Each simulated core runs a program written as an `async` block against a
//! [`Cpu`] handle. Every memory operation or primitive is one await point:
//! the program posts the request and suspends, the scheduler executes it on
//! the [`Simulator`] during that core's turn, charges its latency to the
//! core's clock, and resumes the program on its next turn with the result.
//! Cores take turns one operation at a time in core-id order, so the
//! interleaving depends only on the programs and their inputs.
//!
//! Non-memory work is charged through [`Cpu::compute`] at one cycle per
//! instruction and folded into the core's next operation.

use std::cell::RefCell;
use std::collections::HashMap;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use crate::ccache::MergeStep;
use crate::error::{CoreId, Result, SimError};
use crate::merge::MergeSpec;
use crate::sim::Simulator;

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Load(u64),
    Store(u64, u64),
    CRead { addr: u64, slot: usize },
    CWrite { addr: u64, value: u64, slot: usize },
    SoftMerge,
    Merge,
    MergeInit { spec: MergeSpec, slot: usize },
    Lock(u64),
    Unlock(u64),
    Barrier,
}

#[derive(Default)]
struct Mailbox {
    request: Option<Op>,
    response: Option<u64>,
    compute: u64,
}

/// Handle a core program uses to issue operations.
#[derive(Clone)]
pub struct Cpu {
    id: CoreId,
    mailbox: Rc<RefCell<Mailbox>>,
}

struct OpFuture {
    mailbox: Rc<RefCell<Mailbox>>,
    op: Option<Op>,
}

impl Future for OpFuture {
    type Output = u64;

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<u64> {
        if let Some(op) = self.op.take() {
            self.mailbox.borrow_mut().request = Some(op);
            return Poll::Pending;
        }
        match self.mailbox.borrow_mut().response.take() {
            Some(v) => Poll::Ready(v),
            None => Poll::Pending,
        }
    }
}

impl Cpu {
    pub fn id(&self) -> CoreId {
        self.id
    }

    fn issue(&self, op: Op) -> OpFuture {
        OpFuture {
            mailbox: self.mailbox.clone(),
            op: Some(op),
        }
    }

    /// Charge `n` non-memory instructions.
    pub fn compute(&self, n: u64) {
        self.mailbox.borrow_mut().compute += n;
    }

    pub async fn load(&self, addr: u64) -> u64 {
        self.issue(Op::Load(addr)).await
    }

    pub async fn store(&self, addr: u64, value: u64) {
        self.issue(Op::Store(addr, value)).await;
    }

    pub async fn c_read(&self, addr: u64, slot: usize) -> u64 {
        self.issue(Op::CRead { addr, slot }).await
    }

    pub async fn c_write(&self, addr: u64, value: u64, slot: usize) {
        self.issue(Op::CWrite { addr, value, slot }).await;
    }

    pub async fn soft_merge(&self) {
        self.issue(Op::SoftMerge).await;
    }

    pub async fn merge(&self) {
        self.issue(Op::Merge).await;
    }

    pub async fn merge_init(&self, spec: MergeSpec, slot: usize) {
        self.issue(Op::MergeInit { spec, slot }).await;
    }

    /// Spin until the lock word at `addr` is acquired.
    pub async fn lock(&self, addr: u64) {
        self.issue(Op::Lock(addr)).await;
    }

    pub async fn unlock(&self, addr: u64) {
        self.issue(Op::Unlock(addr)).await;
    }

    pub async fn barrier(&self) {
        self.issue(Op::Barrier).await;
    }
}

type Program = Pin<Box<dyn Future<Output = ()>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Run {
    NeedsPoll,
    Pending,
    AtBarrier,
    Done,
}

struct CoreSlot {
    program: Option<Program>,
    mailbox: Rc<RefCell<Mailbox>>,
    run: Run,
    clock: u64,
}

/// Per-core cycle breakdown. `total = charged + compute + waited`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoreClock {
    pub total: u64,
    /// Latency charged by memory operations and primitives.
    pub charged: u64,
    /// Non-memory instructions.
    pub compute: u64,
    /// Cycles skipped while waiting on FGL locks and barriers.
    pub waited: u64,
}

pub struct Scheduler {
    sim: Simulator,
    cores: Vec<CoreSlot>,
    clocks: Vec<CoreClock>,
    cursor: usize,
    idle_turns: usize,
    lock_release: HashMap<u64, u64>,
    ops: u64,
}

impl Scheduler {
    pub fn new(sim: Simulator) -> Self {
        let n = sim.core_count();
        let cores = (0..n)
            .map(|_| CoreSlot {
                program: None,
                mailbox: Rc::default(),
                run: Run::Done,
                clock: 0,
            })
            .collect();
        Self {
            sim,
            cores,
            clocks: vec![CoreClock::default(); n],
            cursor: 0,
            idle_turns: 0,
            lock_release: HashMap::new(),
            ops: 0,
        }
    }

    pub fn cpu(&self, core: CoreId) -> Cpu {
        Cpu {
            id: core,
            mailbox: self.cores[core].mailbox.clone(),
        }
    }

    /// Install the program for `core`.
    pub fn spawn<F>(&mut self, core: CoreId, program: F)
    where
        F: Future<Output = ()> + 'static,
    {
        let slot = &mut self.cores[core];
        slot.program = Some(Box::pin(program));
        slot.run = Run::NeedsPoll;
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn sim_mut(&mut self) -> &mut Simulator {
        &mut self.sim
    }

    pub fn into_sim(self) -> Simulator {
        self.sim
    }

    pub fn clocks(&self) -> &[CoreClock] {
        &self.clocks
    }

    /// Operations completed so far.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn max_cycles(&self) -> u64 {
        self.cores.iter().map(|c| c.clock).max().unwrap_or(0)
    }

    pub fn run(&mut self) -> Result<()> {
        while self.step()? {}
        Ok(())
    }

    /// Give the next runnable core one turn. Returns `false` once every
    /// program has finished.
    pub fn step(&mut self) -> Result<bool> {
        let n = self.cores.len();
        let alive = self.cores.iter().filter(|c| c.run != Run::Done).count();
        if alive == 0 {
            return Ok(false);
        }
        if self.cores.iter().all(|c| matches!(c.run, Run::Done | Run::AtBarrier)) {
            self.release_barrier();
            return Ok(true);
        }
        let core = (0..n)
            .map(|k| (self.cursor + k) % n)
            .find(|&c| matches!(self.cores[c].run, Run::NeedsPoll | Run::Pending))
            .expect("some core is runnable");
        self.cursor = (core + 1) % n;
        let progressed = self.turn(core)?;
        if progressed {
            self.idle_turns = 0;
        } else {
            self.idle_turns += 1;
            let runnable = self
                .cores
                .iter()
                .filter(|c| matches!(c.run, Run::NeedsPoll | Run::Pending))
                .count();
            if self.idle_turns >= runnable {
                let blocked = (0..n).filter(|&c| self.cores[c].run == Run::Pending).collect();
                return Err(SimError::DeadlockDetected { blocked });
            }
        }
        Ok(true)
    }

    fn release_barrier(&mut self) {
        let t = self
            .cores
            .iter()
            .filter(|c| c.run == Run::AtBarrier)
            .map(|c| c.clock)
            .max()
            .unwrap_or(0);
        for (i, c) in self.cores.iter_mut().enumerate() {
            if c.run == Run::AtBarrier {
                self.clocks[i].waited += t - c.clock;
                c.clock = t;
                c.mailbox.borrow_mut().response = Some(0);
                c.run = Run::NeedsPoll;
            }
        }
        self.idle_turns = 0;
    }

    fn turn(&mut self, core: CoreId) -> Result<bool> {
        if self.cores[core].run == Run::NeedsPoll {
            let slot = &mut self.cores[core];
            let program = slot.program.as_mut().expect("spawned core has a program");
            let mut cx = Context::from_waker(Waker::noop());
            if program.as_mut().poll(&mut cx).is_ready() {
                slot.program = None;
                slot.run = Run::Done;
                let compute = std::mem::take(&mut slot.mailbox.borrow_mut().compute);
                self.charge(core, 0, compute);
                return Ok(true);
            }
            assert!(
                slot.mailbox.borrow().request.is_some(),
                "core programs may only await Cpu operations"
            );
            slot.run = Run::Pending;
        }
        let op = self.cores[core]
            .mailbox
            .borrow()
            .request
            .clone()
            .expect("pending core has a request");
        match self.execute(core, &op)? {
            Outcome::Done(value, latency) => {
                let mb = self.cores[core].mailbox.clone();
                let mut mb = mb.borrow_mut();
                let compute = std::mem::take(&mut mb.compute);
                mb.request = None;
                mb.response = Some(value);
                drop(mb);
                self.charge(core, latency, compute);
                self.cores[core].run = Run::NeedsPoll;
                self.ops += 1;
                Ok(true)
            }
            Outcome::Continue(latency) => {
                self.charge(core, latency, 0);
                Ok(true)
            }
            Outcome::Blocked => Ok(false),
            Outcome::Barrier => {
                let mb = self.cores[core].mailbox.clone();
                let compute = {
                    let mut mb = mb.borrow_mut();
                    mb.request = None;
                    std::mem::take(&mut mb.compute)
                };
                self.charge(core, 0, compute);
                self.cores[core].run = Run::AtBarrier;
                self.ops += 1;
                Ok(true)
            }
        }
    }

    fn charge(&mut self, core: CoreId, latency: u64, compute: u64) {
        let c = &mut self.clocks[core];
        c.charged += latency;
        c.compute += compute;
        self.cores[core].clock += latency + compute;
        c.total = self.cores[core].clock;
    }

    fn wait_until(&mut self, core: CoreId, t: u64) {
        let clock = &mut self.cores[core].clock;
        if t > *clock {
            self.clocks[core].waited += t - *clock;
            *clock = t;
            self.clocks[core].total = *clock;
        }
    }

    fn execute(&mut self, core: CoreId, op: &Op) -> Result<Outcome> {
        let sim = &mut self.sim;
        let res = match op {
            Op::Load(addr) => sim.load(core, *addr).map(|r| Outcome::Done(r.value, r.latency)),
            Op::Store(addr, v) => sim.store(core, *addr, *v).map(|r| Outcome::Done(0, r.latency)),
            Op::CRead { addr, slot } => sim
                .c_read(core, *addr, *slot)
                .map(|r| Outcome::Done(r.value, r.latency)),
            Op::CWrite { addr, value, slot } => sim
                .c_write(core, *addr, *value, *slot)
                .map(|r| Outcome::Done(0, r.latency)),
            Op::SoftMerge => Ok(Outcome::Done(0, sim.soft_merge(core))),
            Op::Merge => sim.merge_step(core).map(|s| match s {
                MergeStep::Continue(l) => Outcome::Continue(l),
                MergeStep::Done(l) => Outcome::Done(0, l),
            }),
            Op::MergeInit { spec, slot } => sim.merge_init(core, spec, *slot).map(|_| Outcome::Done(0, 1)),
            Op::Lock(addr) => match sim.try_lock_word(core, *addr) {
                Ok(Some(r)) => {
                    let release = self.lock_release.get(addr).copied().unwrap_or(0);
                    self.wait_until(core, release);
                    Ok(Outcome::Done(0, r.latency))
                }
                Ok(None) => Ok(Outcome::Blocked),
                Err(e) => Err(e),
            },
            Op::Unlock(addr) => match sim.store(core, *addr, 0) {
                Ok(r) => {
                    let compute = self.cores[core].mailbox.borrow().compute;
                    let release = self.cores[core].clock + compute + r.latency;
                    self.lock_release.insert(*addr, release);
                    Ok(Outcome::Done(0, r.latency))
                }
                Err(e) => Err(e),
            },
            Op::Barrier => Ok(Outcome::Barrier),
        };
        match res {
            Err(SimError::LineLocked { .. }) => Ok(Outcome::Blocked),
            other => other,
        }
    }
}

enum Outcome {
    Done(u64, u64),
    Continue(u64),
    Blocked,
    Barrier,
}
