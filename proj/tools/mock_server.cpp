// Standalone deterministic chat/embeddings endpoint for offline runs.
#include <iostream>

#include <CLI11.hpp>

#include "finharness/mock_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic OpenAI-compatible mock endpoint"};
  finharness::MockChatServer::Options opts;
  int latency_ms = 0;
  app.add_option("--host", opts.host);
  app.add_option("--port", opts.port, "0 picks a free port");
  app.add_option("--latency-ms", latency_ms);
  app.add_option("--embedding-dim", opts.embedding_dim);
  CLI11_PARSE(app, argc, argv);
  opts.latency = std::chrono::milliseconds(latency_ms);

  finharness::MockChatServer server(opts);
  try {
    server.start();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cout << server.base_url() << std::endl;
  server.serve_forever();
  return 0;
}
