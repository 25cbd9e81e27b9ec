use super::*;
use crate::ledger::ContractHandler;

const ADDRESS_INDEX: &str = "addr:";

/// Permitted Networks: remote chains granted access to this host, keyed by
/// the common name of their client certificate.
#[derive(Debug, Clone, Copy, Default)]
pub struct PermittedNetworksContract;

impl ContractHandler for PermittedNetworksContract {
    fn invoke(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<String, ContractError> {
        match method {
            REGISTER => {
                let [name, address] = arity(args, method)?;
                non_empty(name, "name")?;
                non_empty(address, "address")?;
                let index = format!("{ADDRESS_INDEX}{address}");
                if ctx.contains(&index) {
                    return Err(ContractError::rejected("DUPLICATE_ADDRESS", address.clone()));
                }
                let id = next_id(ctx, "pn");
                let record = PermittedNetwork {
                    id: id.clone(),
                    name: name.clone(),
                    address: address.clone(),
                };
                put_record(ctx, &id, &record);
                ctx.put(&index, id.clone());
                Ok(json_string(&id))
            }
            GET_BY_ADDRESS => {
                let [address] = arity(args, method)?;
                let id = ctx
                    .get(&format!("{ADDRESS_INDEX}{address}"))
                    .ok_or_else(|| ContractError::NotFound(format!("permitted network {address}")))?;
                ctx.get(&record_key(&id))
                    .ok_or_else(|| ContractError::NotFound(format!("permitted network {id}")))
            }
            GET_BY_ID if ctx.caller() == Some(PERMITTED_METHODS) => {
                let [id] = arity(args, method)?;
                ctx.get(&record_key(id))
                    .ok_or_else(|| ContractError::NotFound(format!("permitted network {id}")))
            }
            LIST => {
                arity::<0>(args, method)?;
                Ok(list_records(ctx))
            }
            REMOVE => {
                let [id] = arity(args, method)?;
                let record: PermittedNetwork =
                    get_record(ctx, id)?.ok_or_else(|| ContractError::NotFound(format!("permitted network {id}")))?;
                ctx.delete(&record_key(id));
                ctx.delete(&format!("{ADDRESS_INDEX}{}", record.address));
                ctx.invoke(PERMITTED_METHODS, REMOVE_BY_NETWORK_ID, std::slice::from_ref(id))?;
                Ok(NULL.to_owned())
            }
            _ => Err(ContractError::UnknownMethod),
        }
    }
}
