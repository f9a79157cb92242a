#ifndef DISPARITY_AUDIT_LOG_H_
#define DISPARITY_AUDIT_LOG_H_

#include <string_view>

namespace disparity_audit::log {

// Level comes from DISPARITY_AUDIT_LOG (trace, debug, info, warn, error, off);
// default is warn. Output goes to stderr.
void Debug(std::string_view message);
void Info(std::string_view message);
void Warn(std::string_view message);

}  // namespace disparity_audit::log

#endif  // DISPARITY_AUDIT_LOG_H_
