//! Python bindings: `speedbal.solve`, `speedbal.mbal`, `speedbal.verify` and
//! the two reference oracles, over `Job`, `Instance` and `Schedule` classes.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use speedbal::oracle::{brute_force_energy as brute, yds_energy as yds};
use speedbal::{
    check_feasibility, check_schedule_kkt, BudgetJob, EnergyBudgetProblem, Instance, Job, Schedule,
    Segment, SolverConfig,
};

create_exception!(speedbal, SpeedbalError, PyValueError);

fn err(e: speedbal::Error) -> PyErr {
    SpeedbalError::new_err(format!("{}: {e}", e.code()))
}

fn config(speed_tolerance: f64, flow_tolerance: f64) -> SolverConfig {
    SolverConfig {
        speed_tolerance,
        flow_tolerance,
        ..SolverConfig::default()
    }
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn by_id(inst: &Instance, speeds: &[f64]) -> BTreeMap<String, f64> {
    inst.jobs
        .iter()
        .map(|j| j.id.clone())
        .zip(speeds.iter().copied())
        .collect()
}

#[pyclass(name = "Job", module = "speedbal", from_py_object)]
#[derive(Clone)]
struct PyJob {
    #[pyo3(get, set)]
    id: String,
    #[pyo3(get, set)]
    work: f64,
    #[pyo3(get, set)]
    release: f64,
    #[pyo3(get, set)]
    deadline: f64,
}

#[pymethods]
impl PyJob {
    #[new]
    fn new(id: String, work: f64, release: f64, deadline: f64) -> Self {
        PyJob {
            id,
            work,
            release,
            deadline,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Job({:?}, work={}, release={}, deadline={})",
            self.id, self.work, self.release, self.deadline
        )
    }
}

impl From<&Job> for PyJob {
    fn from(j: &Job) -> Self {
        PyJob::new(j.id.clone(), j.work, j.release, j.deadline)
    }
}

#[pyclass(name = "Instance", module = "speedbal")]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (jobs, machines, alpha))]
    fn new(jobs: Vec<PyJob>, machines: usize, alpha: f64) -> PyResult<Self> {
        let jobs = jobs
            .into_iter()
            .map(|j| Job::new(j.id, j.work, j.release, j.deadline))
            .collect();
        let inner =
            speedbal::validate_instance(Instance::new(jobs, machines, alpha)).map_err(err)?;
        Ok(PyInstance { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let raw: Instance = serde_json::from_str(text)
            .map_err(|e| SpeedbalError::new_err(format!("Parse: {e}")))?;
        let inner = speedbal::validate_instance(raw).map_err(err)?;
        Ok(PyInstance { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("serializable instance")
    }

    #[getter]
    fn jobs(&self) -> Vec<PyJob> {
        self.inner.jobs.iter().map(PyJob::from).collect()
    }

    #[getter]
    fn machines(&self) -> usize {
        self.inner.machines
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    fn __len__(&self) -> usize {
        self.inner.jobs.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance({} jobs, machines={}, alpha={})",
            self.inner.jobs.len(),
            self.inner.machines,
            self.inner.alpha
        )
    }
}

#[pyclass(name = "Segment", module = "speedbal", from_py_object)]
#[derive(Clone)]
struct PySegment {
    #[pyo3(get)]
    job: String,
    #[pyo3(get)]
    machine: usize,
    #[pyo3(get)]
    start: f64,
    #[pyo3(get)]
    end: f64,
    #[pyo3(get)]
    speed: f64,
}

#[pymethods]
impl PySegment {
    #[new]
    fn new(job: String, machine: usize, start: f64, end: f64, speed: f64) -> Self {
        PySegment {
            job,
            machine,
            start,
            end,
            speed,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Segment({:?}, machine={}, start={}, end={}, speed={})",
            self.job, self.machine, self.start, self.end, self.speed
        )
    }
}

#[pyclass(name = "Schedule", module = "speedbal")]
struct PySchedule {
    inner: Schedule,
}

#[pymethods]
impl PySchedule {
    #[new]
    fn new(segments: Vec<PySegment>, alpha: f64) -> Self {
        let segments = segments
            .into_iter()
            .map(|s| Segment {
                job: s.job,
                machine: s.machine,
                start: s.start,
                end: s.end,
                speed: s.speed,
            })
            .collect();
        PySchedule {
            inner: Schedule::from_segments(segments, alpha),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: Schedule = serde_json::from_str(text)
            .map_err(|e| SpeedbalError::new_err(format!("Parse: {e}")))?;
        Ok(PySchedule { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("serializable schedule")
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn makespan(&self) -> f64 {
        self.inner.makespan
    }

    #[getter]
    fn segments(&self) -> Vec<PySegment> {
        self.inner
            .segments
            .iter()
            .map(|s| PySegment::new(s.job.clone(), s.machine, s.start, s.end, s.speed))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule(energy={}, makespan={}, {} segments)",
            self.inner.energy,
            self.inner.makespan,
            self.inner.segments.len()
        )
    }
}

#[pyclass(name = "Solution", module = "speedbal")]
struct PySolution {
    #[pyo3(get)]
    speeds: BTreeMap<String, f64>,
    #[pyo3(get)]
    crit_speeds: Vec<f64>,
    #[pyo3(get)]
    energy: f64,
    schedule: Schedule,
    trace: String,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn schedule(&self) -> PySchedule {
        PySchedule {
            inner: self.schedule.clone(),
        }
    }

    /// One dict per step: `step`, `s_crit`, `critical_jobs`, `tight_intervals`,
    /// `machine_updates`, `probes`.
    #[getter]
    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, &self.trace)
    }
}

/// Minimum-energy speeds and schedule.
#[pyfunction]
#[pyo3(signature = (instance, speed_tolerance = 1e-9, flow_tolerance = 1e-9))]
fn solve(instance: &PyInstance, speed_tolerance: f64, flow_tolerance: f64) -> PyResult<PySolution> {
    let inst = &instance.inner;
    let sol = speedbal::solve(inst, &config(speed_tolerance, flow_tolerance)).map_err(err)?;
    Ok(PySolution {
        speeds: by_id(inst, &sol.speeds.speeds),
        crit_speeds: sol.speeds.crit_speeds.clone(),
        energy: sol.schedule.energy,
        trace: serde_json::to_string(&sol.trace).expect("serializable trace"),
        schedule: sol.schedule,
    })
}

/// Optimal speed per job id, without building a timetable.
#[pyfunction]
#[pyo3(signature = (instance, speed_tolerance = 1e-9, flow_tolerance = 1e-9))]
fn bal_speeds(
    instance: &PyInstance,
    speed_tolerance: f64,
    flow_tolerance: f64,
) -> PyResult<BTreeMap<String, f64>> {
    let inst = &instance.inner;
    let (sa, _) =
        speedbal::bal_solve(inst, &config(speed_tolerance, flow_tolerance)).map_err(err)?;
    Ok(by_id(inst, &sa.speeds))
}

/// Smallest makespan within `budget`; `jobs` are `(id, work, release)` tuples.
#[pyfunction]
#[pyo3(signature = (jobs, machines, alpha, budget, speed_tolerance = 1e-9, flow_tolerance = 1e-9))]
fn mbal(
    jobs: Vec<(String, f64, f64)>,
    machines: usize,
    alpha: f64,
    budget: f64,
    speed_tolerance: f64,
    flow_tolerance: f64,
) -> PyResult<(f64, PySchedule)> {
    let problem = EnergyBudgetProblem {
        jobs: jobs
            .into_iter()
            .map(|(id, work, release)| BudgetJob { id, work, release })
            .collect(),
        machines,
        alpha,
        budget,
    };
    let res =
        speedbal::mbal_solve(&problem, &config(speed_tolerance, flow_tolerance)).map_err(err)?;
    Ok((
        res.makespan,
        PySchedule {
            inner: res.schedule,
        },
    ))
}

/// Feasibility and optimality verdicts as a dict (`passed`, `feasibility`, `kkt`).
#[pyfunction]
#[pyo3(signature = (instance, schedule, tol_kkt = 1e-6, tol_feasibility = 1e-9))]
fn verify<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    schedule: &PySchedule,
    tol_kkt: f64,
    tol_feasibility: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let inst = &instance.inner;
    let feasibility = check_feasibility(&schedule.inner, inst, tol_feasibility);
    let kkt = check_schedule_kkt(inst, &schedule.inner, tol_kkt);
    let passed = feasibility.passed && kkt.passed();
    let text = serde_json::json!({ "passed": passed, "feasibility": feasibility, "kkt": kkt });
    loads(py, &text.to_string())
}

/// Single-machine optimum by densest-interval peeling: `(energy, speeds)`.
#[pyfunction]
fn yds_energy(instance: &PyInstance) -> (f64, BTreeMap<String, f64>) {
    let inst = &instance.inner;
    let r = yds(&inst.jobs, inst.alpha);
    (r.energy, by_id(inst, &r.speeds))
}

/// Exhaustive convex search for tiny instances: `(energy, speeds)`.
#[pyfunction]
#[pyo3(signature = (instance, resolution = 1e-7))]
fn brute_force_energy(
    instance: &PyInstance,
    resolution: f64,
) -> PyResult<(f64, BTreeMap<String, f64>)> {
    let inst = &instance.inner;
    let r = brute(inst, resolution).map_err(err)?;
    Ok((r.energy, by_id(inst, &r.speeds)))
}

#[pymodule]
#[pyo3(name = "speedbal")]
fn speedbal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SpeedbalError", m.py().get_type::<SpeedbalError>())?;
    m.add_class::<PyJob>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PySegment>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(bal_speeds, m)?)?;
    m.add_function(wrap_pyfunction!(mbal, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(yds_energy, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_energy, m)?)?;
    Ok(())
}
