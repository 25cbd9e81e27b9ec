use std::sync::Arc;

use super::*;
use crate::connector::LedgerConnector;
use crate::ledger::Ledger;

fn fresh() -> LedgerConnector {
    LedgerConnector::owned(Arc::new(Ledger::with_registry(registry())))
}

#[test]
fn registry_lists_the_three_contracts() {
    let names = registry().names();
    assert_eq!(names, [ACCESSIBLE_NETWORKS, PERMITTED_METHODS, PERMITTED_NETWORKS]);
    let ledger = Ledger::new();
    install_on(&ledger).unwrap();
    assert_eq!(ledger.contracts(), names);
}

#[test]
fn accessible_register_get_list_remove() {
    let conn = fresh();
    let an = AccessibleNetworks(&conn);
    assert_eq!(an.list().unwrap(), vec![]);
    assert_eq!(an.get_by_address("10.0.0.1:7051").unwrap_err().code(), "NOT_FOUND");

    let id = an.register("net1", "10.0.0.1:7051").unwrap();
    assert_eq!(id, "an-00000001");
    assert_eq!(
        an.get_by_address("10.0.0.1:7051").unwrap(),
        AccessibleNetwork {
            id: id.clone(),
            name: "net1".into(),
            relay_address: "10.0.0.1:7051".into()
        }
    );
    assert_eq!(
        an.register("other", "10.0.0.1:7051").unwrap_err().code(),
        "DUPLICATE_ADDRESS"
    );
    assert_eq!(an.register("", "x:1").unwrap_err().code(), "INVALID_ARGUMENT");
    assert_eq!(an.register("n", "").unwrap_err().code(), "INVALID_ARGUMENT");

    an.remove(&id).unwrap();
    assert_eq!(an.get_by_address("10.0.0.1:7051").unwrap_err().code(), "NOT_FOUND");
    assert_eq!(an.remove(&id).unwrap_err().code(), "NOT_FOUND");
    // Address is free again; ids keep counting.
    assert_eq!(an.register("net1", "10.0.0.1:7051").unwrap(), "an-00000002");
}

#[test]
fn accessible_ids_are_sequential() {
    let conn = fresh();
    let an = AccessibleNetworks(&conn);
    for k in 1..=12 {
        assert_eq!(an.register("n", &format!("h{k}:1")).unwrap(), format!("an-{k:08}"));
    }
    let ids: Vec<_> = an.list().unwrap().into_iter().map(|r| r.id).collect();
    let expected: Vec<_> = (1..=12).map(|k| format!("an-{k:08}")).collect();
    assert_eq!(ids, expected);
}

#[test]
fn permitted_register_and_lookup() {
    let conn = fresh();
    let pn = PermittedNetworks(&conn);
    assert_eq!(pn.get_by_address("10.0.0.2:7052").unwrap_err().code(), "NOT_FOUND");
    assert_eq!(pn.register("net2", "10.0.0.2:7052").unwrap(), "pn-00000001");
    assert_eq!(pn.get_by_address("10.0.0.2:7052").unwrap().name, "net2");
    assert_eq!(
        pn.register("dup", "10.0.0.2:7052").unwrap_err().code(),
        "DUPLICATE_ADDRESS"
    );
    assert_eq!(pn.remove("pn-00000099").unwrap_err().code(), "NOT_FOUND");
}

#[test]
fn grants_and_cascade() {
    let conn = fresh();
    let pn = PermittedNetworks(&conn);
    let pm = PermittedMethods(&conn);
    assert_eq!(
        pm.register("pn-00000001", "kv_demo", "get", "").unwrap_err().code(),
        "NOT_FOUND"
    );
    let n1 = pn.register("net2", "10.0.0.2:7052").unwrap();
    let n2 = pn.register("net3", "10.0.0.3:7053").unwrap();
    assert!(!pm.check_permitted(&n1, "kv_demo", "get").unwrap());

    let ids: Vec<_> = ["get", "put", "hello"]
        .iter()
        .map(|m| pm.register(&n1, "kv_demo", m, "demo").unwrap())
        .collect();
    assert_eq!(ids, ["pm-00000001", "pm-00000002", "pm-00000003"]);
    assert_eq!(
        pm.register(&n1, "kv_demo", "get", "again").unwrap_err().code(),
        "DUPLICATE_GRANT"
    );
    pm.register(&n2, "kv_demo", "echo", "").unwrap();
    assert_eq!(pm.register(&n1, "", "get", "").unwrap_err().code(), "INVALID_ARGUMENT");

    let mine: Vec<_> = pm
        .get_by_network_id(&n1)
        .unwrap()
        .into_iter()
        .map(|g| g.method_name)
        .collect();
    assert_eq!(mine, ["get", "put", "hello"]);
    assert!(pm.check_permitted(&n1, "kv_demo", "put").unwrap());
    assert!(!pm.check_permitted(&n2, "kv_demo", "put").unwrap());
    assert_eq!(pm.get_by_network_id("pn-unknown").unwrap(), vec![]);

    pm.remove(&ids[1]).unwrap();
    assert!(!pm.check_permitted(&n1, "kv_demo", "put").unwrap());
    assert_eq!(pm.remove(&ids[1]).unwrap_err().code(), "NOT_FOUND");

    pn.remove(&n1).unwrap();
    assert_eq!(pm.get_by_network_id(&n1).unwrap(), vec![]);
    assert!(!pm.check_permitted(&n1, "kv_demo", "get").unwrap());
    assert_eq!(pm.list().unwrap().len(), 1);
    assert_eq!(pn.list().unwrap().len(), 1);
}

#[test]
fn internal_methods_are_hidden_from_direct_callers() {
    let conn = fresh();
    PermittedNetworks(&conn).register("n", "a:1").unwrap();
    let err = conn
        .query(PERMITTED_NETWORKS, GET_BY_ID, &["pn-00000001".into()])
        .unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_METHOD");
    let err = conn
        .submit(PERMITTED_METHODS, REMOVE_BY_NETWORK_ID, &["pn-00000001".into()])
        .unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_METHOD");
}

#[test]
fn results_are_canonical_json() {
    let conn = fresh();
    PermittedNetworks(&conn).register("net2", "10.0.0.2:7052").unwrap();
    let raw = conn
        .query(PERMITTED_NETWORKS, GET_BY_ADDRESS, &["10.0.0.2:7052".into()])
        .unwrap();
    assert_eq!(raw, r#"{"address":"10.0.0.2:7052","id":"pn-00000001","name":"net2"}"#);
    let raw = conn
        .query(
            PERMITTED_METHODS,
            CHECK_PERMITTED,
            &["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
    assert_eq!(raw, "false");
}

#[test]
fn wrong_arity_is_invalid_argument() {
    let conn = fresh();
    let err = conn
        .submit(ACCESSIBLE_NETWORKS, REGISTER, &["only".into()])
        .unwrap_err();
    assert_eq!(PolicyError::from(err).code(), "INVALID_ARGUMENT");
}
