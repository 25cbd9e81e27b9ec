//! A toy key-value contract used as a shareable service in examples and
//! tests.

use crate::ledger::{ContractContext, ContractError, ContractHandler};

pub const KV_DEMO: &str = "kv_demo";

/// Methods: `put [key, value]`, `get [key]`, `hello []`, `echo [args...]`.
///
/// `echo` returns its arguments as a canonical JSON array.
#[derive(Debug, Clone, Copy, Default)]
pub struct KvDemo;

impl ContractHandler for KvDemo {
    fn invoke(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<String, ContractError> {
        match method {
            "put" => {
                let [key, value] = args else {
                    return Err(ContractError::invalid_argument("put expects [key, value]"));
                };
                if key.is_empty() {
                    return Err(ContractError::invalid_argument("empty key"));
                }
                ctx.put(&format!("k/{key}"), value.clone());
                Ok(String::new())
            }
            "get" => {
                let [key] = args else {
                    return Err(ContractError::invalid_argument("get expects [key]"));
                };
                ctx.get(&format!("k/{key}"))
                    .ok_or_else(|| ContractError::NotFound(format!("key {key}")))
            }
            "hello" => Ok("hello".to_owned()),
            "echo" => Ok(crate::canonical::to_json(args)),
            _ => Err(ContractError::UnknownMethod),
        }
    }
}
