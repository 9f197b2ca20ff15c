#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::mpsc;

use readiness_service::api::router_with_limit;
use readiness_service::api::DEFAULT_BODY_LIMIT;
use readiness_service::{AppState, Store};
use reqwest::blocking::multipart::{Form, Part};
use reqwest::blocking::{Client, Response};
use serde_json::Value;

/// An API server on an ephemeral port, running on its own runtime thread.
pub struct Server {
    pub base: String,
    pub state: AppState,
    pub http: Client,
}

impl Server {
    pub fn start(store: Store) -> Server {
        Self::start_with_limit(store, DEFAULT_BODY_LIMIT)
    }

    pub fn start_with_limit(store: Store, limit: usize) -> Server {
        let state = AppState::new(store);
        let (tx, rx) = mpsc::channel::<SocketAddr>();
        let app = router_with_limit(state.clone(), limit);
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, app).await.unwrap();
            });
        });
        let addr = rx.recv().unwrap();
        Server {
            base: format!("http://{addr}"),
            state,
            http: Client::new(),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn upload(&self, name: &str, csv: &[u8], descriptor: Option<&str>) -> Response {
        let mut form = Form::new().part("file", Part::bytes(csv.to_vec()).file_name(name.to_string()));
        if let Some(d) = descriptor {
            form = form.text("descriptor", d.to_string());
        }
        self.http.post(self.url("/api/datasets")).multipart(form).send().unwrap()
    }

    pub fn upload_ok(&self, name: &str, csv: &[u8]) -> String {
        let r = self.upload(name, csv, None);
        assert_eq!(r.status(), 201);
        json(r)["dataset_id"].as_str().unwrap().to_string()
    }

    pub fn post_json(&self, path: &str, body: &Value) -> Response {
        self.http.post(self.url(path)).json(body).send().unwrap()
    }

    pub fn get(&self, path: &str) -> Response {
        self.http.get(self.url(path)).send().unwrap()
    }
}

pub fn json(r: Response) -> Value {
    serde_json::from_slice(&r.bytes().unwrap()).unwrap()
}

pub fn healthy_csv(rows: usize) -> String {
    let mut s = String::from("age,income,sex,label\n");
    for i in 0..rows {
        s.push_str(&format!("{},{},{},{}\n", 20 + (i * 7) % 45, 1000 + (i * 131) % 900, ["f", "m"][i % 2], (i / 2) % 2));
    }
    s
}

pub fn single_class_csv(rows: usize) -> String {
    let mut s = String::from("age,income,sex,label\n");
    for i in 0..rows {
        s.push_str(&format!("{},{},{},1\n", 20 + (i * 7) % 45, 1000 + (i * 131) % 900, ["f", "m"][i % 2]));
    }
    s
}
