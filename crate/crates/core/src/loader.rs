//! Instance documents: finite-support, finite-support with a `drccp` block, or elliptical.

use crate::drccp::DrccpSpec;
use crate::elliptical::{EllipticalCcp, ELLIPTICAL_TYPE};
use crate::error::{CcpError, Result};
use crate::model::{CcpInstance, InstanceDoc};

#[derive(Debug, Clone)]
pub enum Problem {
    Finite(CcpInstance),
    Drccp(DrccpSpec),
    Elliptical(EllipticalCcp),
}

pub fn load_problem(text: &str) -> Result<Problem> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CcpError::Parse(e.to_string()))?;
    if value.get("type").and_then(|t| t.as_str()) == Some(ELLIPTICAL_TYPE) {
        return Ok(Problem::Elliptical(EllipticalCcp::from_value(value)?));
    }
    let doc: InstanceDoc = serde_json::from_value(value).map_err(|e| CcpError::Parse(e.to_string()))?;
    let drccp = doc.drccp.clone();
    let inst = CcpInstance::from_doc(doc)?;
    match drccp {
        Some(d) => Ok(Problem::Drccp(DrccpSpec::from_doc(inst, &d)?)),
        None => Ok(Problem::Finite(inst)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::elliptical::gaussian_plane;

    #[test]
    fn dispatches_on_content() {
        assert!(matches!(load_problem(&catalog::three_point_shift().to_json()).unwrap(), Problem::Finite(_)));
        assert!(matches!(load_problem(&gaussian_plane().to_json()).unwrap(), Problem::Elliptical(_)));
        let mut v: serde_json::Value = serde_json::from_str(&catalog::symmetric_triangle().to_json()).unwrap();
        v["drccp"] = serde_json::json!({"theta": 0.1, "norm": "l2"});
        assert!(matches!(load_problem(&v.to_string()).unwrap(), Problem::Drccp(_)));
        assert!(matches!(load_problem("{"), Err(CcpError::Parse(_))));
    }
}
