mod common;

use std::collections::HashMap;
use std::sync::OnceLock;

use axum::http::{Method, StatusCode};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::Duration;
use common::{call, call_raw, is_error_body, Fixture, ACCOUNTS, PASSWORD};
use proptest::prelude::*;
use scis_core::{Role, Store};
use scis_server::api::{Access, ENDPOINTS};
use serde_json::json;

fn concrete(path: &str) -> String {
    let path = path.replace("{id}", "1").replace("{report_id}", "1");
    if path == "/api/search" {
        return "/api/search?q=ab&kind=PATIENT".into();
    }
    if path == "/api/reports/management" {
        return "/api/reports/management?from=2024-01-01&to=2024-12-31".into();
    }
    path
}

#[tokio::test]
async fn every_endpoint_needs_a_session() {
    let f = Fixture::new();
    let app = f.app();
    for e in ENDPOINTS {
        let (status, body) = call(&app, e.verb.method(), &concrete(e.path), None, None).await;
        match e.access {
            Access::Public => assert_ne!(status, StatusCode::UNAUTHORIZED, "{}", e.path),
            Access::Requires(_) => {
                assert_eq!(status, StatusCode::UNAUTHORIZED, "{:?} {}", e.verb, e.path);
                assert_eq!(body["error"], "AUTH_REQUIRED");
            }
        }
    }
}

#[tokio::test]
async fn role_endpoint_pairs_follow_the_matrix() {
    let f = Fixture::new();
    let app = f.app();
    let mut cells = 0;
    for e in ENDPOINTS {
        let Access::Requires(permission) = e.access else {
            continue;
        };
        for (role, user) in ACCOUNTS {
            // logout closes the session it is given, so it gets its own
            let token = if e.path == "/api/logout" {
                f.clinic.login(user, PASSWORD).unwrap().token
            } else {
                f.token(role).to_owned()
            };
            let (status, body) = call(&app, e.verb.method(), &concrete(e.path), Some(&token), None).await;
            if role.permits(permission) {
                assert!(
                    status != StatusCode::FORBIDDEN && status != StatusCode::UNAUTHORIZED,
                    "{role} {:?} {} got {status} {body}",
                    e.verb,
                    e.path
                );
            } else {
                assert_eq!(status, StatusCode::FORBIDDEN, "{role} {:?} {}", e.verb, e.path);
                assert_eq!(body["error"], "FORBIDDEN");
            }
            cells += 1;
        }
    }
    assert_eq!(cells, 5 * (ENDPOINTS.len() - 2));
}

#[tokio::test]
async fn clinical_happy_path_over_http() {
    let f = Fixture::new();
    let app = f.app();
    let rec = f.token(Role::Receptionist).to_owned();
    let doc = f.doc().to_owned();

    let (s, b) = call(&app, Method::POST, "/api/login", None, Some(json!({"username": "nurse", "password": PASSWORD}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["role"], "NURSE");
    assert_eq!(b["token"].as_str().unwrap().len(), 32);

    let patient = json!({"given": "mary", "family": "o'brien", "dob": "1960-02-03", "sex": "F"});
    let (s, b) = call(&app, Method::POST, "/api/patients", Some(&rec), Some(patient)).await;
    assert_eq!(s, StatusCode::CREATED);
    let pid = b["id"].as_u64().unwrap();
    let (s, b) = call(&app, Method::GET, &format!("/api/patients/{pid}"), Some(&rec), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["name"]["family"], "O'Brien");
    let (s, b) = call(&app, Method::PUT, &format!("/api/patients/{pid}"), Some(&rec), Some(json!({"phone": "555"}))).await;
    assert_eq!((s, b["phone"].as_str()), (StatusCode::OK, Some("555")));

    let (s, b) = call(&app, Method::POST, &format!("/api/patients/{pid}/record"), Some(&doc), Some(json!({"allergies": ["latex"]}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let rid = b["id"].as_u64().unwrap();
    let (s, b) = call(&app, Method::PUT, &format!("/api/records/{rid}"), Some(&doc), Some(json!({"add_medications": ["aspirin"]}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["history"]["medications"], json!(["aspirin"]));
    let (s, b) = call(&app, Method::POST, &format!("/api/records/{rid}/visits"), Some(&doc), Some(json!({"occurred_at": "2024-02-28T09:30:00Z"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let vid = b["id"].as_u64().unwrap();
    let problem = json!({"view": "FRONT", "region": "FACE", "x": 0.4, "y": 0.1, "description": "pearly papule", "size_mm": 12});
    let (s, b) = call(&app, Method::POST, &format!("/api/visits/{vid}/problems"), Some(&doc), Some(problem)).await;
    assert_eq!(s, StatusCode::CREATED);
    let prob = b["id"].as_u64().unwrap();
    let (s, b) = call(&app, Method::PUT, &format!("/api/problems/{prob}/status"), Some(&doc), Some(json!({"status": "SUSPICIOUS"}))).await;
    assert_eq!((s, b["status"].as_str()), (StatusCode::OK, Some("SUSPICIOUS")));

    let (s, b) = call(&app, Method::GET, "/api/catalogue", Some(&doc), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["procedure_kinds"], json!(["CRYOTHERAPY", "EXCISION", "PUNCH_BIOPSY", "SHAVE_BIOPSY"]));

    let proc = json!({"problem_ids": [prob], "kind": "EXCISION", "clinical_details": "query bcc", "pathology_required": true});
    let (s, b) = call(&app, Method::POST, "/api/procedures", Some(&doc), Some(proc)).await;
    assert_eq!(s, StatusCode::CREATED);
    let proc_id = b["id"].as_u64().unwrap();
    let (s, b) = call(&app, Method::POST, &format!("/api/procedures/{proc_id}/consent"), Some(&doc), None).await;
    assert_eq!((s, b["state"].as_str()), (StatusCode::OK, Some("CONSENTED")));
    let (s, b) = call(&app, Method::PUT, &format!("/api/procedures/{proc_id}/details"), Some(&doc), Some(json!({"procedural_details": "elliptical excision"}))).await;
    assert_eq!((s, b["state"].as_str()), (StatusCode::OK, Some("DETAILED")));
    let (s, b) = call(&app, Method::GET, &format!("/api/procedures/{proc_id}/form"), Some(&doc), None).await;
    assert_eq!(s, StatusCode::OK);
    let form = b["text"].as_str().unwrap();
    assert!(form.contains("Procedure: EXCISION") && form.ends_with(&format!("Form: SCIS-F-{proc_id}\n")));
    let (s, b) = call(&app, Method::POST, &format!("/api/procedures/{proc_id}/finalize"), Some(&doc), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["bill"]["total_cents"], 45000);
    assert_eq!(b["bill"]["status"], "HELD");
    let bill = b["bill"]["id"].as_u64().unwrap();

    let (s, b) = call(&app, Method::POST, &format!("/api/bills/{bill}/unhold"), Some(&doc), None).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("PATHOLOGY_PENDING")));
    let (s, b) = call(&app, Method::GET, &format!("/api/bills/{bill}/render"), Some(&rec), None).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("BILL_HELD")));

    let envelope = json!({"lab_ref": "LAB-1", "received_at": "2024-03-01T08:00:00Z", "body": B64.encode("BCC, clear margins")});
    let (s, b) = call(&app, Method::POST, "/api/pathology/inbox", Some(&doc), Some(envelope.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    let report = b["id"].as_u64().unwrap();
    let (s, b) = call(&app, Method::POST, "/api/pathology/inbox", Some(&doc), Some(envelope)).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("DUPLICATE_LAB_REF")));
    let (s, b) = call(&app, Method::POST, "/api/pathology/inbox", Some(&doc), Some(json!({"lab_ref": "X"}))).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("BAD_ENVELOPE")));
    let (_, b) = call(&app, Method::GET, "/api/pathology/inbox", Some(&doc), None).await;
    assert_eq!(b.as_array().unwrap().len(), 1);
    let (s, _) = call(&app, Method::POST, &format!("/api/procedures/{proc_id}/pathology/{report}"), Some(&doc), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, b) = call(&app, Method::POST, &format!("/api/bills/{bill}/unhold?override=false"), Some(&doc), None).await;
    assert_eq!((s, b["status"].as_str()), (StatusCode::OK, Some("GENERATED")));
    let (s, b) = call(&app, Method::GET, &format!("/api/bills/{bill}/render"), Some(&rec), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(b["text"].as_str().unwrap().contains("$450.00"));
    let (_, b) = call(&app, Method::GET, &format!("/api/bills/{bill}"), Some(&rec), None).await;
    assert_eq!(b["status"], "ISSUED");

    let upload = json!({"media_type": "image/png", "kind": "IMAGE", "owner": {"patient": pid}, "body_b64": B64.encode(b"\x89PNG fake")});
    let (s, b) = call(&app, Method::POST, "/api/documents", Some(&doc), Some(upload)).await;
    assert_eq!(s, StatusCode::CREATED);
    let doc_id = b["id"].as_u64().unwrap();
    let (s, b) = call(&app, Method::GET, &format!("/api/documents/{doc_id}"), Some(&doc), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(B64.decode(b["body_b64"].as_str().unwrap()).unwrap(), b"\x89PNG fake");
    assert_eq!(b["media_type"], "image/png");

    let (s, b) = call(&app, Method::GET, &format!("/api/patients/{pid}/history"), Some(&doc), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["procedures"][0]["pathology_reports"][0]["lab_ref"], "LAB-1");
    assert_eq!(b["documents"][0]["id"], doc_id);

    let (s, b) = call(&app, Method::POST, "/api/waiting-list", Some(&rec), Some(json!({"patient_id": pid}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let entry = b["id"].as_u64().unwrap();
    let (s, _) = call(&app, Method::POST, &format!("/api/waiting-list/{entry}/position"), Some(&rec), Some(json!({"position": 1}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, b) = call(&app, Method::POST, "/api/waiting-list/next", Some(&rec), None).await;
    assert_eq!((s, b["status"].as_str()), (StatusCode::OK, Some("IN_CONSULT")));
    let (_, b) = call(&app, Method::GET, "/api/search?q=o'b&kind=PATIENT", Some(&rec), None).await;
    assert_eq!(b["kind"], "PATIENT");
    assert_eq!(b["results"][0]["id"], pid);

    let mgr = f.token(Role::Manager).to_owned();
    let (s, b) = call(&app, Method::GET, "/api/reports/management?from=2024-03-01&to=2024-03-31", Some(&mgr), None).await;
    assert_eq!(s, StatusCode::OK);
    let text = b["text"].as_str().unwrap();
    assert!(text.contains("New patients: 1"));
    assert!(!text.contains("O'Brien"));
}

#[tokio::test]
async fn administration_over_http() {
    let f = Fixture::new();
    let app = f.app();
    let admin = f.token(Role::Administrator).to_owned();
    let staff = json!({"username": "locum", "role": "PHYSICIAN", "given": "lee", "family": "locum", "password": "pw1"});
    let (s, b) = call(&app, Method::POST, "/api/staff", Some(&admin), Some(staff.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = b["id"].as_u64().unwrap();
    let (s, b) = call(&app, Method::POST, "/api/staff", Some(&admin), Some(staff)).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("DUPLICATE_USERNAME")));

    let (s, b) = call(&app, Method::PUT, &format!("/api/staff/{id}"), Some(&admin), Some(json!({"contact": "ext 4"}))).await;
    assert_eq!((s, b["contact"].as_str()), (StatusCode::OK, Some("ext 4")));
    let (s, b) = call(&app, Method::PUT, &format!("/api/staff/{id}"), Some(&admin), Some(json!({"role": "MANAGER"}))).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("ROLE_CHANGE_NOT_ALLOWED_HERE")));

    let (_, login) = call(&app, Method::POST, "/api/login", None, Some(json!({"username": "locum", "password": "pw1"}))).await;
    let locum = login["token"].as_str().unwrap().to_owned();
    let (s, b) = call(&app, Method::PUT, &format!("/api/staff/{id}/role"), Some(&admin), Some(json!({"role": "NURSE", "active": false}))).await;
    assert_eq!((s, b["active"].as_bool()), (StatusCode::OK, Some(false)));
    let (s, _) = call(&app, Method::GET, "/api/patients", Some(&locum), None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);

    let admin_id = f.ids[&Role::Administrator].0;
    let (s, b) = call(&app, Method::PUT, &format!("/api/staff/{admin_id}/role"), Some(&admin), Some(json!({"role": "MANAGER"}))).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("LAST_ADMINISTRATOR")));

    let (s, _) = call(&app, Method::POST, "/api/centre", Some(&admin), Some(json!({"name": "Harbour Skin Clinic"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, b) = call(&app, Method::GET, "/api/search?q=loc&kind=STAFF", Some(&admin), None).await;
    assert_eq!((s, b["results"][0]["username"].as_str()), (StatusCode::OK, Some("locum")));

    let (s, b) = call(&app, Method::GET, "/api/export", Some(&admin), None).await;
    assert_eq!(s, StatusCode::OK);
    let stream = b.as_str().unwrap();
    assert!(stream.starts_with(r#"{"t":"_header","schema_version":1}"#));
    assert!(stream.contains("Harbour Skin Clinic"));
}

#[tokio::test]
async fn sessions_expire_and_close() {
    let f = Fixture::new();
    let app = f.app();
    let nurse = f.token(Role::Nurse).to_owned();
    let (s, _) = call(&app, Method::GET, "/api/waiting-list", Some(&nurse), None).await;
    assert_eq!(s, StatusCode::OK);
    f.clock.advance(Duration::minutes(29));
    let (s, _) = call(&app, Method::GET, "/api/waiting-list", Some(&nurse), None).await;
    assert_eq!(s, StatusCode::OK);
    f.clock.advance(Duration::minutes(31));
    let (s, b) = call(&app, Method::GET, "/api/waiting-list", Some(&nurse), None).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::UNAUTHORIZED, Some("SESSION_EXPIRED")));

    let (_, login) = call(&app, Method::POST, "/api/login", None, Some(json!({"username": "nurse", "password": PASSWORD}))).await;
    let fresh = login["token"].as_str().unwrap().to_owned();
    let (s, _) = call(&app, Method::POST, "/api/logout", Some(&fresh), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, b) = call(&app, Method::GET, "/api/waiting-list", Some(&fresh), None).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::UNAUTHORIZED, Some("AUTH_REQUIRED")));

    let (s, b) = call(&app, Method::POST, "/api/login", None, Some(json!({"username": "nurse", "password": "nope"}))).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::UNAUTHORIZED, Some("AUTH_FAILED")));
}

#[tokio::test]
async fn transport_failures_use_the_error_body() {
    let f = Fixture::new();
    let app = f.app();
    let doc = f.doc().to_owned();
    let cases: Vec<(Method, &str, Option<&str>, StatusCode, &str)> = vec![
        (Method::GET, "/api/nowhere", None, StatusCode::NOT_FOUND, "NOT_FOUND"),
        (Method::DELETE, "/api/patients", None, StatusCode::NOT_FOUND, "NOT_FOUND"),
        (Method::POST, "/api/procedures", Some("{not json"), StatusCode::UNPROCESSABLE_ENTITY, "BAD_REQUEST"),
        (Method::POST, "/api/procedures", Some(r#"{"kind": 3}"#), StatusCode::UNPROCESSABLE_ENTITY, "BAD_REQUEST"),
        (Method::GET, "/api/patients/abc", None, StatusCode::UNPROCESSABLE_ENTITY, "BAD_REQUEST"),
        (Method::GET, "/api/search?q=ab&kind=NOBODY", None, StatusCode::UNPROCESSABLE_ENTITY, "BAD_REQUEST"),
        (Method::POST, "/api/bills/1/unhold?override=maybe", None, StatusCode::UNPROCESSABLE_ENTITY, "BAD_REQUEST"),
        (Method::POST, "/api/documents", Some(r#"{"media_type":"a","kind":"IMAGE","owner":{"patient":1},"body_b64":"@@"}"#), StatusCode::UNPROCESSABLE_ENTITY, "BAD_REQUEST"),
    ];
    for (method, path, body, status, code) in cases {
        let (s, b) = call_raw(&app, method.clone(), path, Some(&doc), body).await;
        assert_eq!((s, b["error"].as_str()), (status, Some(code)), "{method} {path}");
        assert!(is_error_body(&b), "{b}");
    }
}

#[tokio::test]
async fn restart_keeps_data_and_drops_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let (pid, old_token) = {
        let f = Fixture::on_store(Store::open(&path).unwrap());
        let app = f.app();
        let patient = json!({"given": "ivy", "family": "stone", "dob": "1950-01-01", "sex": "F"});
        let (_, b) = call(&app, Method::POST, "/api/patients", Some(f.token(Role::Receptionist)), Some(patient)).await;
        (b["id"].as_u64().unwrap(), f.token(Role::Receptionist).to_owned())
    };
    let clock = std::sync::Arc::new(scis_core::ManualClock::new(common::start()));
    let clinic = scis_core::Clinic::new(Store::open(&path).unwrap(), common::config(), clock).unwrap();
    let app = scis_server::router(std::sync::Arc::new(clinic));
    let (s, _) = call(&app, Method::GET, "/api/patients", Some(&old_token), None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (_, login) = call(&app, Method::POST, "/api/login", None, Some(json!({"username": "reception", "password": PASSWORD}))).await;
    let token = login["token"].as_str().unwrap().to_owned();
    let (s, b) = call(&app, Method::GET, &format!("/api/patients/{pid}"), Some(&token), None).await;
    assert_eq!((s, b["name"]["family"].as_str()), (StatusCode::OK, Some("Stone")));
}

// One fixture for all cases; building accounts hashes passwords.
fn shared() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(Fixture::new)
}

fn garbage_body() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        Just(None),
        Just(Some("{}".to_owned())),
        Just(Some("[]".to_owned())),
        Just(Some("null".to_owned())),
        "[ -~]{0,40}".prop_map(Some),
        (any::<i64>(), "[a-z_]{1,12}").prop_map(|(n, k)| Some(json!({ k: n }).to_string())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn induced_failures_share_one_body_schema(
        idx in 0..ENDPOINTS.len(),
        who in 0usize..7,
        id in prop_oneof![Just("0".to_owned()), Just("999999".to_owned()), "[a-z]{1,5}", any::<u32>().prop_map(|n| n.to_string())],
        body in garbage_body(),
    ) {
        let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let f = shared();
        let app = f.app();
        let e = &ENDPOINTS[idx];
        let token = match who {
            0..=4 => Some(f.token(ACCOUNTS[who].0).to_owned()),
            5 => Some("0123456789abcdef0123456789abcdef".to_owned()),
            _ => None,
        };
        let path = e.path.replace("{id}", &id).replace("{report_id}", &id);
        let (status, b) = runtime.block_on(call_raw(&app, e.verb.method(), &path, token.as_deref(), body.as_deref()));
        if !status.is_success() {
            prop_assert!(is_error_body(&b), "{} {} -> {} {}", e.path, status, b, path);
            let expected: HashMap<&str, StatusCode> = HashMap::from([
                ("AUTH_REQUIRED", StatusCode::UNAUTHORIZED),
                ("AUTH_FAILED", StatusCode::UNAUTHORIZED),
                ("FORBIDDEN", StatusCode::FORBIDDEN),
                ("NOT_FOUND", StatusCode::NOT_FOUND),
                ("BAD_REQUEST", StatusCode::UNPROCESSABLE_ENTITY),
            ]);
            if let Some(want) = b["error"].as_str().and_then(|c| expected.get(c)) {
                prop_assert_eq!(status, *want);
            }
        }
    }
}
