use pyo3::prelude::*;

#[pymodule]
fn leoslice_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
