//! Server-side request handling: per-request authentication, then dispatch.

use serde::de::DeserializeOwned;
use serde_json::Value;
use tracing::debug;

use super::wire::{
    Envelope, ErrorCode, InvokeRequest, InvokeResponse, MessageType, MethodRef, PermittedMethodsRequest,
    PermittedMethodsResponse, WireError, PROTOCOL_VERSION,
};
use crate::connector::{ChainConnector, ConnectorError};
use crate::pki::{extract_common_name, Certificate};
use crate::policy::{PermittedMethod, PermittedMethods, PermittedNetwork, PermittedNetworks, PolicyError};

fn internal(e: impl std::fmt::Display) -> WireError {
    WireError::new(ErrorCode::Internal, e.to_string())
}

/// Map the peer certificate to its Permitted Networks record.
///
/// The TLS layer has already verified the chain; this only consults the
/// registry, keyed by the certificate's common name.
pub fn authenticate(connector: &dyn ChainConnector, peer: &Certificate) -> Result<PermittedNetwork, WireError> {
    let cn = extract_common_name(peer).map_err(|e| WireError::new(ErrorCode::Unauthenticated, e.to_string()))?;
    match PermittedNetworks(connector).get_by_address(&cn) {
        Ok(record) => Ok(record),
        Err(PolicyError::NotFound(_)) => Err(WireError::new(
            ErrorCode::Unauthenticated,
            format!("{cn} is not a permitted network"),
        )),
        Err(e) => Err(internal(e)),
    }
}

/// The Message Handler: stateless, so one instance serves every connection.
pub struct MessageHandler<C> {
    connector: C,
}

impl<C: ChainConnector> MessageHandler<C> {
    pub fn new(connector: C) -> Self {
        Self { connector }
    }

    pub fn connector(&self) -> &C {
        &self.connector
    }

    pub fn authenticate(&self, peer: &Certificate) -> Result<PermittedNetwork, WireError> {
        authenticate(&self.connector, peer)
    }

    pub fn handle_permitted_network_info(&self, caller: &PermittedNetwork) -> PermittedNetwork {
        caller.clone()
    }

    pub fn handle_permitted_methods(
        &self,
        caller: &PermittedNetwork,
        network_id: &str,
    ) -> Result<Vec<PermittedMethod>, WireError> {
        if network_id != caller.id {
            return Err(WireError::new(
                ErrorCode::Forbidden,
                format!("{} may only list its own grants", caller.id),
            ));
        }
        PermittedMethods(&self.connector)
            .get_by_network_id(network_id)
            .map_err(internal)
    }

    /// Check the grant, then run the target through `submit`.
    pub fn handle_invoke(
        &self,
        caller: &PermittedNetwork,
        method: &MethodRef,
        args: &[String],
    ) -> Result<String, WireError> {
        let grants = PermittedMethods(&self.connector);
        let permitted = grants
            .check_permitted(&caller.id, &method.contract_name, &method.method_name)
            .map_err(internal)?;
        let not_permitted = || {
            WireError::new(
                ErrorCode::MethodNotPermitted,
                format!(
                    "{} is not granted {}.{}",
                    caller.id, method.contract_name, method.method_name
                ),
            )
        };
        if !permitted {
            return Err(not_permitted());
        }
        let matches_grant = grants
            .get_by_network_id(&caller.id)
            .map_err(internal)?
            .iter()
            .any(|g| g.id == method.permitted_method_id && MethodRef::from(g) == *method);
        if !matches_grant {
            return Err(not_permitted());
        }
        self.connector
            .submit(&method.contract_name, &method.method_name, args)
            .map_err(|e| match e {
                ConnectorError::Backend(b) => WireError::new(ErrorCode::ContractError, format!("{}: {b}", b.code())),
                lost => internal(lost),
            })
    }

    /// Decode, authenticate and dispatch one request payload.
    pub fn handle_payload(&self, peer: &Certificate, payload: &[u8]) -> Envelope {
        let request: Envelope = match serde_json::from_slice(payload) {
            Ok(env) => env,
            Err(e) => return Envelope::failure(0, "", WireError::new(ErrorCode::Malformed, e.to_string())),
        };
        let (id, kind) = (request.id, request.kind.clone());
        match self.handle_request(peer, request) {
            Ok(body) => Envelope::success(id, &kind, body),
            Err(err) => {
                debug!(id, kind, code = %err.code, "request failed: {}", err.msg);
                Envelope::failure(id, &kind, err)
            }
        }
    }

    fn handle_request(&self, peer: &Certificate, request: Envelope) -> Result<Value, WireError> {
        if request.v != PROTOCOL_VERSION {
            return Err(WireError::new(
                ErrorCode::Malformed,
                format!("unsupported protocol version {}", request.v),
            ));
        }
        if request.is_response() || request.error.is_some() {
            return Err(WireError::new(ErrorCode::Malformed, "expected a request envelope"));
        }
        let kind = MessageType::parse(&request.kind)
            .ok_or_else(|| WireError::new(ErrorCode::Malformed, format!("unknown message type {:?}", request.kind)))?;
        let caller = self.authenticate(peer)?;
        let value = match kind {
            MessageType::PermittedNetworkInfo => {
                body::<serde_json::Map<String, Value>>(request.body)?;
                serde_json::to_value(self.handle_permitted_network_info(&caller))
            }
            MessageType::PermittedMethods => {
                let req: PermittedMethodsRequest = body(request.body)?;
                let methods = self.handle_permitted_methods(&caller, &req.network_id)?;
                serde_json::to_value(PermittedMethodsResponse { methods })
            }
            MessageType::Invoke => {
                let req: InvokeRequest = body(request.body)?;
                let result = self.handle_invoke(&caller, &req.method_ref(), &req.args)?;
                serde_json::to_value(InvokeResponse { result })
            }
        };
        value.map_err(internal)
    }
}

fn body<T: DeserializeOwned>(value: Value) -> Result<T, WireError> {
    serde_json::from_value(value).map_err(|e| WireError::new(ErrorCode::Malformed, format!("bad body: {e}")))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use serde_json::json;

    use super::*;
    use crate::connector::LedgerConnector;
    use crate::demo::KV_DEMO;
    use crate::ledger::Ledger;
    use crate::pki::{issue_cert, CertRole, CertificateAuthority};

    struct Fixture {
        handler: MessageHandler<LedgerConnector>,
        ca: CertificateAuthority,
    }

    impl Fixture {
        fn new() -> Self {
            let ledger = Arc::new(Ledger::with_registry(crate::host_registry()));
            Self {
                handler: MessageHandler::new(LedgerConnector::owned(ledger)),
                ca: CertificateAuthority::generate("test-ca").unwrap(),
            }
        }

        fn peer(&self, cn: &str) -> Certificate {
            issue_cert(&self.ca, cn, CertRole::Client).unwrap().cert
        }

        fn call(&self, peer: &Certificate, id: u64, kind: MessageType, body: Value) -> Envelope {
            let req = Envelope::request(id, kind, body);
            self.handler.handle_payload(peer, req.to_json().as_bytes())
        }
    }

    fn error_code(env: &Envelope) -> ErrorCode {
        assert_eq!(env.ok, Some(false), "{env:?}");
        env.error.as_ref().unwrap().code
    }

    #[test]
    fn authenticate_by_common_name() {
        let f = Fixture::new();
        let peer = f.peer("10.0.0.2:7052");
        assert_eq!(
            f.handler.authenticate(&peer).unwrap_err().code,
            ErrorCode::Unauthenticated
        );
        let id = PermittedNetworks(f.handler.connector())
            .register("net2", "10.0.0.2:7052")
            .unwrap();
        let pn = f.handler.authenticate(&peer).unwrap();
        assert_eq!((pn.id.as_str(), pn.address.as_str()), (id.as_str(), "10.0.0.2:7052"));
        assert_eq!(
            f.handler.authenticate(&f.peer("10.0.0.2:7053")).unwrap_err().code,
            ErrorCode::Unauthenticated
        );
    }

    #[test]
    fn dispatch_after_auth() {
        let f = Fixture::new();
        let peer = f.peer("10.0.0.2:7052");
        let resp = f.call(&peer, 5, MessageType::PermittedNetworkInfo, json!({}));
        assert_eq!(resp.id, 5);
        assert_eq!(error_code(&resp), ErrorCode::Unauthenticated);

        let conn = f.handler.connector();
        let id = PermittedNetworks(conn).register("net2", "10.0.0.2:7052").unwrap();
        let resp = f.call(&peer, 6, MessageType::PermittedNetworkInfo, json!({}));
        assert_eq!(resp.ok, Some(true));
        assert_eq!(resp.body["id"], json!(id));

        let resp = f.call(&peer, 7, MessageType::PermittedMethods, json!({"networkId": id}));
        assert_eq!(resp.body, json!({"methods": []}));
        let resp = f.call(
            &peer,
            8,
            MessageType::PermittedMethods,
            json!({"networkId": "pn-00000002"}),
        );
        assert_eq!(error_code(&resp), ErrorCode::Forbidden);
    }

    #[test]
    fn invoke_requires_matching_grant() {
        let f = Fixture::new();
        let conn = f.handler.connector();
        let peer = f.peer("10.0.0.2:7052");
        let nid = PermittedNetworks(conn).register("net2", "10.0.0.2:7052").unwrap();
        let pm = PermittedMethods(conn);
        let gid = pm.register(&nid, KV_DEMO, "hello", "").unwrap();
        let hello = MethodRef {
            permitted_method_id: gid.clone(),
            contract_name: KV_DEMO.into(),
            method_name: "hello".into(),
        };
        let invoke = |m: &MethodRef, args: &[&str]| {
            let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            f.call(
                &peer,
                1,
                MessageType::Invoke,
                serde_json::to_value(InvokeRequest::new(m, &args)).unwrap(),
            )
        };
        let resp = invoke(&hello, &[]);
        assert_eq!(resp.body, json!({"result": "hello"}));

        let echo = MethodRef {
            method_name: "echo".into(),
            ..hello.clone()
        };
        assert_eq!(error_code(&invoke(&echo, &[])), ErrorCode::MethodNotPermitted);
        let forged = MethodRef {
            permitted_method_id: "pm-00000042".into(),
            ..hello.clone()
        };
        assert_eq!(error_code(&invoke(&forged, &[])), ErrorCode::MethodNotPermitted);

        let get = MethodRef {
            permitted_method_id: pm.register(&nid, KV_DEMO, "get", "").unwrap(),
            contract_name: KV_DEMO.into(),
            method_name: "get".into(),
        };
        let resp = invoke(&get, &["missing"]);
        assert_eq!(error_code(&resp), ErrorCode::ContractError);
        assert!(resp.error.unwrap().msg.starts_with("NOT_FOUND"));

        pm.remove(&gid).unwrap();
        assert_eq!(error_code(&invoke(&hello, &[])), ErrorCode::MethodNotPermitted);
    }

    #[test]
    fn malformed_requests() {
        let f = Fixture::new();
        let peer = f.peer("a:1");
        let resp = f.handler.handle_payload(&peer, b"not json");
        assert_eq!(error_code(&resp), ErrorCode::Malformed);
        let resp = f
            .handler
            .handle_payload(&peer, br#"{"body":{},"id":4,"type":"transfer","v":1}"#);
        assert_eq!((resp.id, error_code(&resp)), (4, ErrorCode::Malformed));
        let resp = f
            .handler
            .handle_payload(&peer, br#"{"body":{},"id":4,"type":"invoke","v":2}"#);
        assert_eq!(error_code(&resp), ErrorCode::Malformed);
        PermittedNetworks(f.handler.connector()).register("n", "a:1").unwrap();
        let resp = f.call(&peer, 9, MessageType::PermittedMethods, json!({"network": "x"}));
        assert_eq!(error_code(&resp), ErrorCode::Malformed);
    }
}
