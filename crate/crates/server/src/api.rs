//! HTTP routes. Every route appears in [`ENDPOINTS`] with the permission it
//! needs; the gate middleware checks the session and that permission before
//! the handler runs, and refuses any route missing from the table.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, MatchedPath, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Extension, Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::NaiveDate;
use scis_core::auth::StaffSummary;
use scis_core::clinic::{
    NewProblem, NewProcedure, NewStaff, PatientChanges, SearchKind, StaffChanges, UploadRequest,
    WaitingUpdate,
};
use scis_core::documents::{DocumentKind, DocumentOwner, PathologyEnvelope};
use scis_core::domain::{CentreDetails, LesionStatus, PatientInput};
use scis_core::ids::{
    BillId, DocumentId, EntryId, PatientId, ProblemId, ProcedureId, RecordId, ReportId, StaffId,
    VisitId,
};
use scis_core::workflow::{HistoryChanges, MedicalHistory};
use scis_core::{Clinic, Error, Permission, Role};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ApiError, ApiJson, ApiPath, ApiQuery};

pub const SESSION_HEADER: &str = "x-scis-session";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Get,
    Post,
    Put,
}

impl Verb {
    pub fn of(method: &Method) -> Option<Self> {
        match *method {
            Method::GET => Some(Verb::Get),
            Method::POST => Some(Verb::Post),
            Method::PUT => Some(Verb::Put),
            _ => None,
        }
    }

    pub fn method(self) -> Method {
        match self {
            Verb::Get => Method::GET,
            Verb::Post => Method::POST,
            Verb::Put => Method::PUT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    Requires(Permission),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub verb: Verb,
    pub path: &'static str,
    pub access: Access,
}

const fn ep(verb: Verb, path: &'static str, permission: Permission) -> Endpoint {
    Endpoint {
        verb,
        path,
        access: Access::Requires(permission),
    }
}

use Permission as P;
use Verb::{Get, Post, Put};

pub const ENDPOINTS: &[Endpoint] = &[
    Endpoint { verb: Get, path: "/api/health", access: Access::Public },
    Endpoint { verb: Post, path: "/api/login", access: Access::Public },
    ep(Post, "/api/logout", P::Login),
    ep(Get, "/api/catalogue", P::Login),
    ep(Get, "/api/patients", P::EditPatient),
    ep(Post, "/api/patients", P::CreatePatient),
    ep(Get, "/api/patients/{id}", P::EditPatient),
    ep(Put, "/api/patients/{id}", P::EditPatient),
    ep(Post, "/api/patients/{id}/record", P::CreateRecord),
    ep(Get, "/api/patients/{id}/history", P::AccessPatientRecord),
    ep(Put, "/api/records/{id}", P::EditRecord),
    ep(Post, "/api/records/{id}/visits", P::CreateVisit),
    ep(Post, "/api/visits/{id}/problems", P::CreateProblem),
    ep(Put, "/api/problems/{id}/status", P::EditRecord),
    ep(Post, "/api/procedures", P::InsertProcedure),
    ep(Post, "/api/procedures/{id}/consent", P::InsertProcedure),
    ep(Put, "/api/procedures/{id}/details", P::InsertProcedure),
    ep(Post, "/api/procedures/{id}/finalize", P::FinalizeProcedure),
    ep(Post, "/api/procedures/{id}/pathology/{report_id}", P::AllocatePathology),
    ep(Get, "/api/procedures/{id}/form", P::GenerateForm),
    ep(Get, "/api/pathology/inbox", P::AllocatePathology),
    ep(Post, "/api/pathology/inbox", P::AllocatePathology),
    ep(Post, "/api/documents", P::UploadDocument),
    ep(Get, "/api/documents/{id}", P::AccessPatientRecord),
    ep(Get, "/api/bills/{id}", P::PrintBill),
    ep(Post, "/api/bills/{id}/hold", P::HoldBill),
    ep(Post, "/api/bills/{id}/unhold", P::HoldBill),
    ep(Get, "/api/bills/{id}/render", P::PrintBill),
    ep(Get, "/api/search", P::Search),
    ep(Get, "/api/waiting-list", P::ManageWaitingList),
    ep(Post, "/api/waiting-list", P::ManageWaitingList),
    ep(Post, "/api/waiting-list/{id}/position", P::ManageWaitingList),
    ep(Post, "/api/waiting-list/next", P::ManageWaitingList),
    ep(Post, "/api/staff", P::CreateStaffAccount),
    ep(Get, "/api/staff/{id}", P::EditStaffAccount),
    ep(Put, "/api/staff/{id}", P::EditStaffAccount),
    ep(Put, "/api/staff/{id}/role", P::ManageRole),
    ep(Post, "/api/centre", P::CreateCentre),
    ep(Get, "/api/reports/management", P::PrintReport),
    ep(Get, "/api/export", P::ManageRole),
];

pub fn endpoint(verb: Verb, path: &str) -> Option<&'static Endpoint> {
    ENDPOINTS.iter().find(|e| e.verb == verb && e.path == path)
}

type AppState = Arc<Clinic>;
type ApiResult<T> = Result<T, ApiError>;

/// The caller's session token, set by the gate for non-public routes.
#[derive(Debug, Clone)]
struct Token(Arc<str>);

/// Runs a clinic operation off the async workers; password hashing and
/// datastore writes both block.
async fn run<T, F>(clinic: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Clinic) -> scis_core::Result<T> + Send + 'static,
{
    let clinic = Arc::clone(clinic);
    tokio::task::spawn_blocking(move || f(&clinic))
        .await
        .map_err(|e| Error::Storage(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

async fn gate(State(clinic): State<AppState>, mut req: Request, next: Next) -> Response {
    let matched = req.extensions().get::<MatchedPath>().map(|m| m.as_str().to_owned());
    let found = Verb::of(req.method()).zip(matched).and_then(|(v, p)| endpoint(v, &p));
    let permission = match found.map(|e| e.access) {
        Some(Access::Public) => return next.run(req).await,
        Some(Access::Requires(p)) => p,
        None => return ApiError(Error::Forbidden).into_response(),
    };
    let token = match req.headers().get(SESSION_HEADER).and_then(|v| v.to_str().ok()) {
        Some(t) if !t.trim().is_empty() => t.trim().to_owned(),
        _ => return ApiError(Error::AuthRequired).into_response(),
    };
    if let Err(e) = clinic.authorize(&token, permission) {
        return ApiError(e).into_response();
    }
    req.extensions_mut().insert(Token(token.into()));
    next.run(req).await
}

async fn not_found() -> ApiError {
    ApiError(Error::NotFound("route".into()))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Created {
    id: u64,
}

fn created(id: u64) -> (StatusCode, Json<Created>) {
    (StatusCode::CREATED, Json(Created { id }))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
}

#[derive(Serialize)]
struct LoginResponse {
    token: String,
    staff_id: StaffId,
    role: Role,
}

async fn login(State(c): State<AppState>, ApiJson(body): ApiJson<LoginBody>) -> ApiResult<Json<LoginResponse>> {
    let (session, role) = run(&c, move |c| {
        let session = c.login(&body.username, &body.password)?;
        let role = c
            .snapshot()
            .staff
            .get(&session.staff_id)
            .map(|a| a.role)
            .ok_or(Error::AuthFailed)?;
        Ok((session, role))
    })
    .await?;
    Ok(Json(LoginResponse {
        token: session.token,
        staff_id: session.staff_id,
        role,
    }))
}

async fn logout(State(c): State<AppState>, Extension(Token(t)): Extension<Token>) -> ApiResult<Json<Value>> {
    run(&c, move |c| c.logout(&t)).await?;
    Ok(Json(json!({ "logged_out": true })))
}

async fn catalogue(State(c): State<AppState>) -> Json<Value> {
    let schedule = &c.config().fee_schedule;
    Json(json!({
        "procedure_kinds": schedule.catalogue().collect::<Vec<_>>(),
        "currency": schedule.currency,
    }))
}

#[derive(Deserialize)]
struct CreatePatientBody {
    #[serde(flatten)]
    input: PatientInput,
    #[serde(default)]
    acknowledge_duplicate: bool,
}

async fn list_patients(State(c): State<AppState>, Extension(Token(t)): Extension<Token>) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.list_patients(&t)).await?))
}

async fn create_patient(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiJson(body): ApiJson<CreatePatientBody>,
) -> ApiResult<impl IntoResponse> {
    let id = run(&c, move |c| c.create_patient(&t, &body.input, body.acknowledge_duplicate)).await?;
    Ok(created(id.0))
}

async fn get_patient(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<PatientId>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.get_patient(&t, id)).await?))
}

async fn edit_patient(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<PatientId>,
    ApiJson(changes): ApiJson<PatientChanges>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.edit_patient(&t, id, &changes)).await?))
}

async fn create_record(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<PatientId>,
    ApiJson(history): ApiJson<MedicalHistory>,
) -> ApiResult<impl IntoResponse> {
    let rid = run(&c, move |c| c.create_record(&t, id, &history)).await?;
    Ok(created(rid.0))
}

async fn patient_history(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<PatientId>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.get_patient_history(&t, id)).await?))
}

async fn edit_record(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<RecordId>,
    ApiJson(changes): ApiJson<HistoryChanges>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.edit_record(&t, id, &changes)).await?))
}

#[derive(Deserialize)]
struct VisitBody {
    occurred_at: String,
}

async fn create_visit(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<RecordId>,
    ApiJson(body): ApiJson<VisitBody>,
) -> ApiResult<impl IntoResponse> {
    let vid = run(&c, move |c| c.create_visit(&t, id, &body.occurred_at)).await?;
    Ok(created(vid.0))
}

async fn create_problem(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<VisitId>,
    ApiJson(problem): ApiJson<NewProblem>,
) -> ApiResult<impl IntoResponse> {
    let pid = run(&c, move |c| c.create_problem(&t, id, &problem)).await?;
    Ok(created(pid.0))
}

#[derive(Deserialize)]
struct StatusBody {
    status: LesionStatus,
}

async fn problem_status(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<ProblemId>,
    ApiJson(body): ApiJson<StatusBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.set_problem_status(&t, id, body.status)).await?))
}

async fn insert_procedure(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiJson(request): ApiJson<NewProcedure>,
) -> ApiResult<impl IntoResponse> {
    let id = run(&c, move |c| c.insert_procedure(&t, &request)).await?;
    Ok(created(id.0))
}

async fn consent(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<ProcedureId>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.record_consent(&t, id)).await?))
}

#[derive(Deserialize)]
struct DetailsBody {
    procedural_details: String,
}

async fn details(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<ProcedureId>,
    ApiJson(body): ApiJson<DetailsBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.record_procedure_details(&t, id, &body.procedural_details)).await?))
}

async fn finalize(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<ProcedureId>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.finalize_procedure(&t, id)).await?))
}

async fn allocate(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath((id, report_id)): ApiPath<(ProcedureId, ReportId)>,
) -> ApiResult<impl IntoResponse> {
    let (procedure, report) = run(&c, move |c| c.allocate_pathology_report(&t, report_id, id)).await?;
    Ok(Json(json!({ "procedure": procedure, "report": report })))
}

async fn pathology_form(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<ProcedureId>,
) -> ApiResult<impl IntoResponse> {
    let text = run(&c, move |c| c.generate_pathology_form(&t, id)).await?;
    Ok(Json(json!({ "procedure_id": id, "text": text })))
}

async fn inbox(State(c): State<AppState>, Extension(Token(t)): Extension<Token>) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.pathology_inbox(&t)).await?))
}

async fn ingest(State(c): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<impl IntoResponse> {
    let body = body.map_err(|e| Error::BadRequest(e.body_text()))?;
    let text = std::str::from_utf8(&body).map_err(|_| Error::BadEnvelope("body is not UTF-8".into()))?;
    let envelope = PathologyEnvelope::from_json(text)?;
    let id = run(&c, move |c| c.ingest_pathology(&envelope)).await?;
    Ok(created(id.0))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadBody {
    media_type: String,
    kind: DocumentKind,
    owner: DocumentOwner,
    body_b64: String,
}

async fn upload(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiJson(body): ApiJson<UploadBody>,
) -> ApiResult<impl IntoResponse> {
    let bytes = B64
        .decode(body.body_b64.trim())
        .map_err(|e| Error::BadRequest(format!("body_b64: {e}")))?;
    let request = UploadRequest {
        owner: body.owner,
        kind: body.kind,
        media_type: body.media_type,
        body: bytes,
    };
    let id = run(&c, move |c| c.upload_document(&t, &request)).await?;
    Ok(created(id.0))
}

async fn fetch_document(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<DocumentId>,
) -> ApiResult<impl IntoResponse> {
    let doc = run(&c, move |c| c.fetch_document(&t, id)).await?;
    Ok(Json(json!({
        "id": doc.id,
        "kind": doc.kind,
        "media_type": doc.media_type,
        "body_b64": B64.encode(&doc.body),
    })))
}

async fn get_bill(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<BillId>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.get_bill(&t, id)).await?))
}

async fn hold_bill(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<BillId>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.hold_bill(&t, id)).await?))
}

#[derive(Deserialize)]
struct UnholdQuery {
    #[serde(default, rename = "override")]
    override_pending: bool,
}

async fn unhold_bill(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<BillId>,
    ApiQuery(q): ApiQuery<UnholdQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.unhold_bill(&t, id, q.override_pending)).await?))
}

async fn render_bill(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<BillId>,
) -> ApiResult<impl IntoResponse> {
    let text = run(&c, move |c| c.render_bill(&t, id)).await?;
    Ok(Json(json!({ "bill_id": id, "text": text })))
}

#[derive(Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
    #[serde(default = "patient_kind")]
    kind: SearchKind,
}

fn patient_kind() -> SearchKind {
    SearchKind::Patient
}

async fn search(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiQuery(q): ApiQuery<SearchQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.search(&t, &q.q, q.kind)).await?))
}

async fn waiting_list(State(c): State<AppState>, Extension(Token(t)): Extension<Token>) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.waiting_list(&t)).await?))
}

#[derive(Deserialize)]
struct WaitingAddBody {
    patient_id: PatientId,
}

async fn waiting_add(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiJson(body): ApiJson<WaitingAddBody>,
) -> ApiResult<impl IntoResponse> {
    let entry = run(&c, move |c| c.waiting_list_add(&t, body.patient_id)).await?;
    Ok((StatusCode::CREATED, Json(entry)))
}

async fn waiting_update(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<EntryId>,
    ApiJson(update): ApiJson<WaitingUpdate>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.waiting_list_update(&t, id, update)).await?))
}

async fn waiting_next(State(c): State<AppState>, Extension(Token(t)): Extension<Token>) -> ApiResult<impl IntoResponse> {
    Ok(Json(run(&c, move |c| c.waiting_list_next(&t)).await?))
}

#[derive(Deserialize)]
struct CreateStaffBody {
    #[serde(flatten)]
    details: NewStaff,
    password: String,
}

async fn create_staff(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiJson(body): ApiJson<CreateStaffBody>,
) -> ApiResult<impl IntoResponse> {
    let id = run(&c, move |c| c.create_staff_account(&t, &body.details, &body.password)).await?;
    Ok(created(id.0))
}

async fn get_staff(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<StaffId>,
) -> ApiResult<Json<StaffSummary>> {
    Ok(Json(run(&c, move |c| c.get_staff(&t, id)).await?))
}

async fn edit_staff(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<StaffId>,
    ApiJson(changes): ApiJson<StaffChanges>,
) -> ApiResult<Json<StaffSummary>> {
    Ok(Json(run(&c, move |c| c.edit_staff_account(&t, id, &changes)).await?))
}

#[derive(Deserialize)]
struct RoleBody {
    role: Role,
    #[serde(default = "yes")]
    active: bool,
}

fn yes() -> bool {
    true
}

async fn manage_role(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiPath(id): ApiPath<StaffId>,
    ApiJson(body): ApiJson<RoleBody>,
) -> ApiResult<Json<StaffSummary>> {
    Ok(Json(run(&c, move |c| c.manage_role(&t, id, body.role, body.active)).await?))
}

async fn create_centre(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiJson(details): ApiJson<CentreDetails>,
) -> ApiResult<impl IntoResponse> {
    let id = run(&c, move |c| c.create_centre(&t, &details)).await?;
    Ok(created(id.0))
}

#[derive(Deserialize)]
struct RangeQuery {
    from: NaiveDate,
    to: NaiveDate,
}

async fn management_report(
    State(c): State<AppState>,
    Extension(Token(t)): Extension<Token>,
    ApiQuery(range): ApiQuery<RangeQuery>,
) -> ApiResult<impl IntoResponse> {
    let text = run(&c, move |c| c.generate_management_report(&t, range.from, range.to)).await?;
    Ok(Json(json!({ "from": range.from, "to": range.to, "text": text })))
}

async fn export(State(c): State<AppState>, Extension(Token(t)): Extension<Token>) -> ApiResult<Response> {
    let stream = run(&c, move |c| c.export_snapshot(&t)).await?;
    let mut response = stream.into_response();
    response
        .headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/x-ndjson"));
    Ok(response)
}

/// The full service router over one clinic.
pub fn router(clinic: Arc<Clinic>) -> Router {
    let body_limit = clinic.config().max_upload_bytes.saturating_mul(2).saturating_add(64 * 1024);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/catalogue", get(catalogue))
        .route("/api/patients", get(list_patients).post(create_patient))
        .route("/api/patients/{id}", get(get_patient).put(edit_patient))
        .route("/api/patients/{id}/record", post(create_record))
        .route("/api/patients/{id}/history", get(patient_history))
        .route("/api/records/{id}", put(edit_record))
        .route("/api/records/{id}/visits", post(create_visit))
        .route("/api/visits/{id}/problems", post(create_problem))
        .route("/api/problems/{id}/status", put(problem_status))
        .route("/api/procedures", post(insert_procedure))
        .route("/api/procedures/{id}/consent", post(consent))
        .route("/api/procedures/{id}/details", put(details))
        .route("/api/procedures/{id}/finalize", post(finalize))
        .route("/api/procedures/{id}/pathology/{report_id}", post(allocate))
        .route("/api/procedures/{id}/form", get(pathology_form))
        .route("/api/pathology/inbox", get(inbox).post(ingest))
        .route("/api/documents", post(upload))
        .route("/api/documents/{id}", get(fetch_document))
        .route("/api/bills/{id}", get(get_bill))
        .route("/api/bills/{id}/hold", post(hold_bill))
        .route("/api/bills/{id}/unhold", post(unhold_bill))
        .route("/api/bills/{id}/render", get(render_bill))
        .route("/api/search", get(search))
        .route("/api/waiting-list", get(waiting_list).post(waiting_add))
        .route("/api/waiting-list/{id}/position", post(waiting_update))
        .route("/api/waiting-list/next", post(waiting_next))
        .route("/api/staff", post(create_staff))
        .route("/api/staff/{id}", get(get_staff).put(edit_staff))
        .route("/api/staff/{id}/role", put(manage_role))
        .route("/api/centre", post(create_centre))
        .route("/api/reports/management", get(management_report))
        .route("/api/export", get(export))
        .route_layer(middleware::from_fn_with_state(Arc::clone(&clinic), gate))
        .fallback(not_found)
        .method_not_allowed_fallback(not_found)
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(clinic)
}
