use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Request};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use scis_core::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// The body of every failed response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

/// The fixed error to status mapping.
pub fn status_of(e: &Error) -> StatusCode {
    use Error::*;
    match e {
        AuthRequired | AuthFailed | SessionExpired => StatusCode::UNAUTHORIZED,
        Forbidden => StatusCode::FORBIDDEN,
        NotFound(_) => StatusCode::NOT_FOUND,
        DuplicateUsername
        | DuplicatePatient(_)
        | DuplicateWarningUnacknowledged(_)
        | DuplicateLabRef
        | AlreadyAllocated
        | InvalidTransition { .. }
        | InvalidBillTransition { .. }
        | RecordAlreadyExists
        | NotEmpty
        | LastAdministrator
        | AdministratorExists
        | PathologyPending
        | BillHeld
        | ProcedureNotReady
        | NoPathologyExpected
        | EmptyList => StatusCode::CONFLICT,
        Validation(_)
        | EmptyName
        | EmptyPassword
        | LegacySchemeDisabled
        | RoleChangeNotAllowedHere
        | BadTimestamp(_)
        | BadLocation
        | BadSize
        | CrossPatientProblems
        | EmptyProblemList
        | UnknownProcedureKind(_)
        | EmptyDetails
        | TooLarge { .. }
        | EmptyPayload
        | BadEnvelope(_)
        | BadRange
        | QueryTooShort
        | BadPosition
        | BadRequest(_)
        | UnknownKind(_)
        | UnknownRegion(_)
        | SchemaMismatch(_)
        | IntegrityViolation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        NoEncryptionKey => StatusCode::SERVICE_UNAVAILABLE,
        CorruptCiphertext | ConfigInvalid(_) | Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status.is_server_error() {
            tracing::error!(code = self.0.code(), "{}", self.0);
        }
        let body = ErrorBody {
            error: self.0.code().to_owned(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

/// JSON body whose rejections use the uniform error body.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Self(v))
            .map_err(|e: JsonRejection| Error::BadRequest(e.body_text()).into())
    }
}

pub struct ApiPath<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for ApiPath<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Path::<T>::from_request_parts(parts, state)
            .await
            .map(|axum::extract::Path(v)| Self(v))
            .map_err(|e: PathRejection| Error::BadRequest(e.body_text()).into())
    }
}

pub struct ApiQuery<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|axum::extract::Query(v)| Self(v))
            .map_err(|e: QueryRejection| Error::BadRequest(e.body_text()).into())
    }
}
