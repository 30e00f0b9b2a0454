import sys
from facilitation.main import main

sys.exit(main())
