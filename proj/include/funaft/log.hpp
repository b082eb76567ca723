#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string>

namespace funaft {

inline std::atomic<bool>& verbose_warnings() {
    static std::atomic<bool> flag{false};
    return flag;
}

inline void warn(const std::string& msg) {
    if (!verbose_warnings().load()) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::clog << "funaft: warning: " << msg << '\n';
}

}  // namespace funaft
