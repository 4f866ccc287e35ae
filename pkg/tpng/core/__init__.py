# Core settings and error types
