// Copyright 2026 The kgsome Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <string>

// Library headers first: httplib pulls in <resolv.h>, whose `_res` macro
// collides with identifiers inside Eigen.
#include "kgsome/service.hpp"

#include "httplib.h"

namespace kgsome {

// Routes every GET and POST to `service`. An empty `cors_origin` sends no CORS
// headers.
inline void bind_service(httplib::Server& server, const ExplorerService& service, const std::string& cors_origin = {}) {
  const auto dispatch = [&service, cors_origin](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const auto r = service.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
    if (!cors_origin.empty()) res.set_header("Access-Control-Allow-Origin", cors_origin);
  };
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.Put(".*", dispatch);
  server.Delete(".*", dispatch);
  server.Patch(".*", dispatch);
  server.Options(".*", [cors_origin](const httplib::Request&, httplib::Response& res) {
    if (!cors_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
    res.status = 204;
  });
}

}  // namespace kgsome
