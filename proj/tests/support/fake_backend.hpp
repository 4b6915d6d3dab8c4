#pragma once

#include <functional>
#include <string>

#include "introplan/backends.hpp"

namespace testsupport {

// Programmable backend for unit tests: each complete() call is answered by
// the injected function.
class CallbackBackend : public introplan::TextBackend {
public:
    using Fn = std::function<introplan::CompletionResponse(const introplan::CompletionRequest&)>;

    explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}

    introplan::CompletionResponse complete(const introplan::CompletionRequest& request) override {
        ++calls;
        return fn_(request);
    }
    std::string id() const override { return "callback-stub"; }

    int calls = 0;

private:
    Fn fn_;
};

// Answers every request with the same fixed text.
inline CallbackBackend fixed_text_backend(std::string text) {
    return CallbackBackend([text = std::move(text)](const introplan::CompletionRequest&) {
        introplan::CompletionResponse r;
        r.text = text;
        return r;
    });
}

}  // namespace testsupport
