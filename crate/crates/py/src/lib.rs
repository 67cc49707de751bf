use pyo3::prelude::*;

#[pymodule]
fn caloric_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
