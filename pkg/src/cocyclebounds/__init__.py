"""Linear cocycles over subshifts of finite type: entropy, covering
certificates, branching trees and bounded-orbit entropy bounds."""

__version__ = "0.1.0"
