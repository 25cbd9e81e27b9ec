use super::*;
use crate::ledger::ContractHandler;

/// `grant:<json [networkId, contract, method]>` -> grant id.
fn grant_key(network_id: &str, contract: &str, method: &str) -> String {
    format!("grant:{}", canonical::to_json(&[network_id, contract, method]))
}

/// `bynet:<json networkId>:` prefix; entries are `<prefix><id>` -> "".
fn by_network_prefix(network_id: &str) -> String {
    format!("bynet:{}:", json_string(network_id))
}

/// Permitted Methods: `(network, contract.method)` authorization grants.
#[derive(Debug, Clone, Copy, Default)]
pub struct PermittedMethodsContract;

impl PermittedMethodsContract {
    fn grants_for(ctx: &ContractContext<'_>, network_id: &str) -> Vec<String> {
        let prefix = by_network_prefix(network_id);
        ctx.scan_prefix(&prefix)
            .into_iter()
            .map(|(k, _)| k[prefix.len()..].to_owned())
            .collect()
    }

    fn delete_grant(ctx: &mut ContractContext<'_>, grant: &PermittedMethod) {
        ctx.delete(&record_key(&grant.id));
        ctx.delete(&grant_key(&grant.network_id, &grant.contract_name, &grant.method_name));
        ctx.delete(&format!("{}{}", by_network_prefix(&grant.network_id), grant.id));
    }
}

impl ContractHandler for PermittedMethodsContract {
    fn invoke(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<String, ContractError> {
        match method {
            REGISTER => {
                let [network_id, contract_name, method_name, description] = arity(args, method)?;
                non_empty(network_id, "networkId")?;
                non_empty(contract_name, "contractName")?;
                non_empty(method_name, "methodName")?;
                ctx.invoke(PERMITTED_NETWORKS, GET_BY_ID, std::slice::from_ref(network_id))?;
                let key = grant_key(network_id, contract_name, method_name);
                if ctx.contains(&key) {
                    return Err(ContractError::rejected(
                        "DUPLICATE_GRANT",
                        format!("{network_id} -> {contract_name}.{method_name}"),
                    ));
                }
                let id = next_id(ctx, "pm");
                let record = PermittedMethod {
                    id: id.clone(),
                    network_id: network_id.clone(),
                    contract_name: contract_name.clone(),
                    method_name: method_name.clone(),
                    description: description.clone(),
                };
                put_record(ctx, &id, &record);
                ctx.put(&key, id.clone());
                ctx.put(&format!("{}{id}", by_network_prefix(network_id)), "");
                Ok(json_string(&id))
            }
            GET_PERMITTED_METHODS_BY_NETWORK_ID => {
                let [network_id] = arity(args, method)?;
                let items: Vec<String> = Self::grants_for(ctx, network_id)
                    .into_iter()
                    .filter_map(|id| ctx.get(&record_key(&id)))
                    .collect();
                Ok(format!("[{}]", items.join(",")))
            }
            CHECK_PERMITTED => {
                let [network_id, contract_name, method_name] = arity(args, method)?;
                let granted = ctx.contains(&grant_key(network_id, contract_name, method_name));
                Ok(granted.to_string())
            }
            LIST => {
                arity::<0>(args, method)?;
                Ok(list_records(ctx))
            }
            REMOVE => {
                let [id] = arity(args, method)?;
                let grant: PermittedMethod =
                    get_record(ctx, id)?.ok_or_else(|| ContractError::NotFound(format!("permitted method {id}")))?;
                Self::delete_grant(ctx, &grant);
                Ok(NULL.to_owned())
            }
            REMOVE_BY_NETWORK_ID if ctx.caller() == Some(PERMITTED_NETWORKS) => {
                let [network_id] = arity(args, method)?;
                let ids = Self::grants_for(ctx, network_id);
                for id in &ids {
                    if let Some(grant) = get_record::<PermittedMethod>(ctx, id)? {
                        Self::delete_grant(ctx, &grant);
                    }
                }
                Ok(ids.len().to_string())
            }
            _ => Err(ContractError::UnknownMethod),
        }
    }
}
