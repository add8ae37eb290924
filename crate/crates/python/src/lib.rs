//! Python bindings: machine configuration, the simulator's access and merge
//! primitives, the merge-function catalog and whole workload runs.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ccache_sim::line::{Line, WORDS_PER_LINE};
use ccache_sim::merge::apply_lines;
use ccache_sim::workloads::{run_workload as run, WorkloadConfig};
use ccache_sim::{AccessResult, MergeSpec, SimConfig, SimError, SimReport, Simulator};

create_exception!(ccache_sim_py, SimulationError, PyException);

fn err(e: SimError) -> PyErr {
    SimulationError::new_err(e.to_string())
}

/// Machine configuration. `Config()` is the full-size machine,
/// `Config.scaled()` the small 4-core one.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SimConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self {
            inner: SimConfig::default(),
        }
    }

    #[staticmethod]
    fn scaled() -> Self {
        Self {
            inner: SimConfig::scaled(),
        }
    }

    /// Apply the keys of a TOML machine description.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let file = ccache_sim::ConfigFile::parse(text).map_err(err)?;
        let mut inner = SimConfig::default();
        file.apply(&mut inner);
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn cores(&self) -> usize {
        self.inner.cache.cores
    }

    #[setter]
    fn set_cores(&mut self, v: usize) {
        self.inner.cache.cores = v;
    }

    #[getter]
    fn l1_bytes(&self) -> usize {
        self.inner.cache.l1.capacity_bytes
    }

    #[getter]
    fn llc_bytes(&self) -> usize {
        self.inner.cache.llc.capacity_bytes
    }

    #[setter]
    fn set_llc_bytes(&mut self, v: usize) {
        self.inner.cache.llc.capacity_bytes = v;
    }

    #[getter]
    fn sb_entries(&self) -> usize {
        self.inner.ccache.sb_entries
    }

    #[setter]
    fn set_sb_entries(&mut self, v: usize) {
        self.inner.ccache.sb_entries = v;
    }

    #[getter]
    fn dirty_merge(&self) -> bool {
        self.inner.ccache.dirty_merge
    }

    #[setter]
    fn set_dirty_merge(&mut self, v: bool) {
        self.inner.ccache.dirty_merge = v;
    }

    fn __repr__(&self) -> String {
        let c = &self.inner.cache;
        format!(
            "Config(cores={}, l1_bytes={}, llc_bytes={}, sb_entries={})",
            c.cores, c.l1.capacity_bytes, c.llc.capacity_bytes, self.inner.ccache.sb_entries
        )
    }
}

fn access(py: Python<'_>, r: AccessResult) -> PyResult<Bound<'_, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("latency", r.latency)?;
    d.set_item("level", r.level.name())?;
    Ok(d)
}

/// A simulated machine with a flat word-addressed memory.
#[pyclass(name = "Simulator", unsendable)]
struct PySimulator {
    inner: Simulator,
}

#[pymethods]
impl PySimulator {
    #[new]
    #[pyo3(signature = (config, memory_bytes = 1 << 20))]
    fn new(config: &PyConfig, memory_bytes: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Simulator::new(config.inner.clone(), memory_bytes).map_err(err)?,
        })
    }

    fn declare_cdata(&mut self, base: u64, length: u64) -> PyResult<()> {
        self.inner.declare_cdata(base, length).map_err(err)
    }

    fn init_word(&mut self, addr: u64, value: u64) -> PyResult<()> {
        self.inner.init_word(addr, value).map_err(err)
    }

    /// Current architectural value, without simulating an access.
    fn peek_word(&self, addr: u64) -> PyResult<u64> {
        self.inner.peek_word(addr).map_err(err)
    }

    fn load<'py>(&mut self, py: Python<'py>, core: usize, addr: u64) -> PyResult<Bound<'py, PyDict>> {
        access(py, self.inner.load(core, addr).map_err(err)?)
    }

    fn store<'py>(&mut self, py: Python<'py>, core: usize, addr: u64, value: u64) -> PyResult<Bound<'py, PyDict>> {
        access(py, self.inner.store(core, addr, value).map_err(err)?)
    }

    #[pyo3(signature = (core, name, slot = 0))]
    fn merge_init(&mut self, core: usize, name: &str, slot: usize) -> PyResult<()> {
        self.inner.merge_init_named(core, name, slot).map_err(err)
    }

    #[pyo3(signature = (core, addr, slot = 0))]
    fn c_read<'py>(&mut self, py: Python<'py>, core: usize, addr: u64, slot: usize) -> PyResult<Bound<'py, PyDict>> {
        access(py, self.inner.c_read(core, addr, slot).map_err(err)?)
    }

    #[pyo3(signature = (core, addr, value, slot = 0))]
    fn c_write<'py>(
        &mut self,
        py: Python<'py>,
        core: usize,
        addr: u64,
        value: u64,
        slot: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        access(py, self.inner.c_write(core, addr, value, slot).map_err(err)?)
    }

    fn soft_merge(&mut self, core: usize) {
        self.inner.soft_merge(core);
    }

    /// Merge every privatized line of `core`. Returns (lines merged, cycles).
    fn merge(&mut self, core: usize) -> PyResult<(u64, u64)> {
        let out = self.inner.merge(core).map_err(err)?;
        Ok((out.merged, out.latency))
    }

    fn source_buffer_len(&self, core: usize) -> usize {
        self.inner.source_buffer(core).len()
    }

    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.inner.counters().named() {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.inner.check_invariants().map_err(SimulationError::new_err)
    }
}

fn to_line(words: Vec<u64>) -> PyResult<Line> {
    let n = words.len();
    words
        .try_into()
        .map_err(|_| SimulationError::new_err(format!("a line has {WORDS_PER_LINE} words, got {n}")))
}

/// Apply a catalog merge function to one line: returns the new memory line.
#[pyfunction]
fn merge_apply(name: &str, src: Vec<u64>, upd: Vec<u64>, mem: Vec<u64>) -> PyResult<Vec<u64>> {
    let mut f = MergeSpec::parse(name).and_then(|s| s.instantiate()).map_err(err)?;
    let out = apply_lines(&mut f, &to_line(src)?, &to_line(upd)?, &to_line(mem)?).map_err(err)?;
    Ok(out.to_vec())
}

fn report<'py>(py: Python<'py>, r: &SimReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("workload", &r.workload)?;
    d.set_item("variant", &r.variant)?;
    d.set_item("cores", r.cores)?;
    d.set_item("ws_fraction", r.ws_fraction)?;
    d.set_item("seed", r.seed)?;
    d.set_item("llc_bytes", r.llc_bytes)?;
    d.set_item("max_cycles", r.max_cycles)?;
    d.set_item("core_cycles", r.core_cycles.clone())?;
    d.set_item("peak_bytes", r.peak_bytes)?;
    d.set_item("dropped_merges", r.dropped_merges)?;
    d.set_item("oracle_pass", r.oracle_pass)?;
    d.set_item("quality", r.quality)?;
    d.set_item("error", r.error.clone())?;
    d.set_item("passed", r.passed())?;
    let c = PyDict::new(py);
    for (k, v) in r.counters.named() {
        c.set_item(k, v)?;
    }
    d.set_item("counters", c)?;
    Ok(d)
}

/// Run one workload variant and return its report as a dict.
#[pyfunction]
#[pyo3(signature = (workload, variant, config = None, ws_fraction = 0.25, seed = 1, soft_merge = true))]
fn run_workload<'py>(
    py: Python<'py>,
    workload: &str,
    variant: &str,
    config: Option<&PyConfig>,
    ws_fraction: f64,
    seed: u64,
    soft_merge: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.map_or_else(SimConfig::scaled, |c| c.inner.clone());
    let mut wl = WorkloadConfig::new(workload.parse().map_err(err)?, variant.parse().map_err(err)?);
    wl.ws_fraction = ws_fraction;
    wl.seed = seed;
    wl.soft_merge = soft_merge;
    let r = py.detach(|| run(&cfg, &wl));
    report(py, &r)
}

#[pymodule]
fn ccache_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(merge_apply, m)?)?;
    m.add_function(wrap_pyfunction!(run_workload, m)?)?;
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    Ok(())
}
