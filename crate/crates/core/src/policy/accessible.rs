use super::*;
use crate::ledger::ContractHandler;

const ADDRESS_INDEX: &str = "addr:";

/// Accessible Networks: remote chains this host may call.
#[derive(Debug, Clone, Copy, Default)]
pub struct AccessibleNetworksContract;

impl ContractHandler for AccessibleNetworksContract {
    fn invoke(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<String, ContractError> {
        match method {
            REGISTER => {
                let [name, relay_address] = arity(args, method)?;
                non_empty(name, "name")?;
                non_empty(relay_address, "relayAddress")?;
                let index = format!("{ADDRESS_INDEX}{relay_address}");
                if ctx.contains(&index) {
                    return Err(ContractError::rejected("DUPLICATE_ADDRESS", relay_address.clone()));
                }
                let id = next_id(ctx, "an");
                let record = AccessibleNetwork {
                    id: id.clone(),
                    name: name.clone(),
                    relay_address: relay_address.clone(),
                };
                put_record(ctx, &id, &record);
                ctx.put(&index, id.clone());
                Ok(json_string(&id))
            }
            GET_BY_ADDRESS => {
                let [relay_address] = arity(args, method)?;
                let id = ctx
                    .get(&format!("{ADDRESS_INDEX}{relay_address}"))
                    .ok_or_else(|| ContractError::NotFound(format!("accessible network {relay_address}")))?;
                ctx.get(&record_key(&id))
                    .ok_or_else(|| ContractError::NotFound(format!("accessible network {id}")))
            }
            LIST => {
                arity::<0>(args, method)?;
                Ok(list_records(ctx))
            }
            REMOVE => {
                let [id] = arity(args, method)?;
                let record: AccessibleNetwork =
                    get_record(ctx, id)?.ok_or_else(|| ContractError::NotFound(format!("accessible network {id}")))?;
                ctx.delete(&record_key(id));
                ctx.delete(&format!("{ADDRESS_INDEX}{}", record.relay_address));
                Ok(NULL.to_owned())
            }
            _ => Err(ContractError::UnknownMethod),
        }
    }
}
