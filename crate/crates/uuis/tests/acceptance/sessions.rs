//! Idle expiry on an injected clock and an expired token against every route.

use chrono::Duration;
use uuis::api::{ApiRequest, Auth, ROUTES};
use uuis::Error;

use crate::common::world;
use crate::{ensure, Outcome};

fn concrete(pattern: &str) -> String {
    pattern
        .split('/')
        .map(|seg| match seg {
            "{name}" => "seeAssets",
            "{page}" => "assets",
            s if s.starts_with('{') => "1",
            s => s,
        })
        .collect::<Vec<_>>()
        .join("/")
}

pub fn criterion() -> Outcome {
    let w = world();
    let (_, username) = w.person(3, None, None, &["administrator"]);

    let (token, _) = w.login(&username);
    w.clock.advance(Duration::minutes(29) + Duration::seconds(59));
    ensure!(w.svc.authenticate(&token).is_ok(), "session expired after 29m59s idle");
    w.clock.advance(Duration::minutes(29) + Duration::seconds(59));
    ensure!(w.svc.authenticate(&token).is_ok(), "activity did not reset the idle window");
    w.clock.advance(Duration::minutes(30));
    let expired = w.svc.authenticate(&token);
    ensure!(expired == Err(Error::SessionExpired), "after 30m00s idle: {expired:?}");

    // one session per route so each call meets a freshly expired token
    let guarded: Vec<_> = ROUTES.iter().filter(|r| r.auth != Auth::Public).collect();
    let tokens: Vec<String> = guarded.iter().map(|_| w.login(&username).0).collect();
    w.clock.advance(Duration::minutes(30));
    for (route, token) in guarded.iter().zip(&tokens) {
        let mut request = ApiRequest::new(route.method, &concrete(route.pattern)).token(token);
        if route.method != "GET" {
            request = request.json(serde_json::json!({}));
        }
        let r = w.call(request);
        ensure!(
            r.status == 401 && r.code().as_deref() == Some("SESSION_EXPIRED"),
            "{} {} answered {} {:?}",
            route.method,
            route.pattern,
            r.status,
            r.code()
        );
    }
    Ok(format!("29m59s live, 30m00s expired, {} guarded routes refuse an expired token", guarded.len()))
}
