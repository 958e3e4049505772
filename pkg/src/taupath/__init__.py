"""Parameter sensitivity estimation for stochastic reaction networks."""
